#![no_main]

use libfuzzer_sys::fuzz_target;
use mlc_core::experiments::ChannelSpec;

fuzz_target!(|data: &str| {
    if let Ok(spec) = data.parse::<ChannelSpec>() {
        let again: ChannelSpec = spec.to_string().parse().expect("display output parses");
        assert_eq!(again, spec);
        let _ = spec.resolve(1.0);
    }
});
