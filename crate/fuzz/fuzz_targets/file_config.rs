#![no_main]

use libfuzzer_sys::fuzz_target;
use mlc_core::experiments::{resolve, CliArgs, FileConfig};

fuzz_target!(|data: &str| {
    if let Ok(file) = FileConfig::from_json(data) {
        let _ = resolve(CliArgs::default(), file);
    }
});
