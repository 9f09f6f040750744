#![no_main]

use libfuzzer_sys::fuzz_target;
use quadwalk::io::{parse_steps_json, steps_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sd) = parse_steps_json(text) {
        let total: f64 = sd.probabilities().map(|(_, _, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let again = parse_steps_json(&steps_to_json(&sd)).unwrap();
        assert_eq!(sd.steps(), again.steps());
    }
});
