#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::promptkit::ClassVocabulary;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(vocab) = ClassVocabulary::from_json_str(json) {
        // Accepted vocabularies re-validate and round-trip through JSON.
        assert!(vocab.validate().is_ok());
        let encoded = serde_json::to_string(&vocab).unwrap();
        let back = ClassVocabulary::from_json_str(&encoded).unwrap();
        assert_eq!(back, vocab);
    }
});
