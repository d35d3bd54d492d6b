#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::parse::ResponseParser;
use spectrabench::promptkit::{ClassEntry, ClassVocabulary, TaskKind};

fn vocabulary() -> ClassVocabulary {
    ClassVocabulary::new(
        TaskKind::MultiLabel,
        ["Forest", "Water", "Urban fabric", "Permanent crop", "crop"]
            .iter()
            .map(|n| ClassEntry {
                name: n.to_string(),
                definition: None,
            })
            .collect(),
    )
    .unwrap()
}

// First byte toggles chain-of-thought awareness; the rest is model text.
fuzz_target!(|data: &[u8]| {
    if data.is_empty() {
        return;
    }
    let Ok(text) = std::str::from_utf8(&data[1..]) else {
        return;
    };
    let vocab = vocabulary();
    let parser = ResponseParser::new(&vocab).cot_aware(data[0] & 1 == 1);
    let outcome = parser.parse(text);
    // Vocabulary closure holds for every input.
    for label in &outcome.label_set.labels {
        assert!(vocab.classes.iter().any(|c| &c.name == label));
    }
    // Idempotence.
    assert_eq!(parser.parse(text), outcome);
});
