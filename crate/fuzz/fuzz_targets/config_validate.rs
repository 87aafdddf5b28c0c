#![no_main]

use libfuzzer_sys::fuzz_target;

use curvex::config::{Experiment, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let experiment = Experiment::ALL.get(selector as usize % (Experiment::ALL.len() + 1)).copied();
    if let Err(e) = RunConfig::from_text(text, experiment, None) {
        // diagnostics must point inside the input
        if let Some(line) = e.line {
            assert!(line >= 1 && line <= text.lines().count());
        }
    }
});
