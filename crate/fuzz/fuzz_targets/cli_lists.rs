#![no_main]

use libfuzzer_sys::fuzz_target;
use quadwalk::io::{parse_list, parse_pair, parse_pair_f64};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((a, b)) = parse_pair(text) {
        assert_eq!(parse_pair(&format!("{a},{b}")).unwrap(), (a, b));
    }
    if let Ok((a, b)) = parse_pair_f64(text) {
        assert!(a.is_finite() && b.is_finite());
    }
    if let Ok(v) = parse_list(text) {
        assert!(!v.is_empty());
    }
});
