#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::promptkit::render_template;

fuzz_target!(|data: &[u8]| {
    let Ok(template) = std::str::from_utf8(data) else {
        return;
    };
    let bindings = [
        ("image_count", "6"),
        ("band_catalog", "catalog"),
        ("image_descriptors", "descriptors"),
        ("reasoning", ""),
        ("class_list", "classes"),
        ("class_guides", ""),
        ("multi_answer", ""),
        ("answer_directive", "ANSWER: <class>"),
    ];
    if let Ok(rendered) = render_template(template, &bindings) {
        // A successful render never leaks an unresolved known placeholder.
        for (name, _) in bindings {
            assert!(!rendered.contains(&format!("{{{{{name}}}}}")));
        }
    }
});
