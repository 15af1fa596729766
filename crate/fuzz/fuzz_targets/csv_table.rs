#![no_main]

use libfuzzer_sys::fuzz_target;
use mlc_core::experiments::CsvTable;

fuzz_target!(|data: &str| {
    if let Ok(table) = CsvTable::parse(data) {
        for row in &table.rows {
            assert_eq!(row.len(), table.columns.len());
        }
        for name in &table.columns {
            let _ = table.numbers(name);
        }
    }
});
