#![no_main]

use eb_fission::csvio::read_x_column;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(xs) = read_x_column(data) {
        assert!(xs.iter().all(|x| x.is_finite()));
    }
});
