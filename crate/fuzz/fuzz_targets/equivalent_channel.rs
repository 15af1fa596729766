#![no_main]

use libfuzzer_sys::fuzz_target;
use mlc_core::lmmse::EquivalentChannel;

fuzz_target!(|data: &str| {
    if let Ok(records) = EquivalentChannel::from_json(data) {
        let text = EquivalentChannel::to_json(&records);
        assert_eq!(EquivalentChannel::from_json(&text).unwrap(), records);
    }
});
