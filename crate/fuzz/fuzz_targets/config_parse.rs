#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = curvex::config::parse_document(text) {
            // every entry keeps the line it came from
            let lines = text.lines().count();
            for s in doc.sections.values() {
                assert!(s.line >= 1 && s.line <= lines);
                for (line, _) in s.entries.values() {
                    assert!(*line > s.line && *line <= lines);
                }
            }
        }
    }
});
