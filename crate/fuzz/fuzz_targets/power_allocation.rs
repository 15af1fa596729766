#![no_main]

use libfuzzer_sys::fuzz_target;
use mlc_core::allocation::PowerAllocation;

fuzz_target!(|data: &str| {
    if let Ok(a) = PowerAllocation::from_json(data) {
        assert_eq!(a.powers().len(), a.num_layers());
        assert!(a.powers().iter().all(|&p| p > 0.0));
        assert_eq!(PowerAllocation::from_json(&a.to_json()).unwrap(), a);
    }
});
