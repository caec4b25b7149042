#![no_main]

use eb_fission::MonotoneStepFn;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(step) = MonotoneStepFn::read_csv(data) else {
        return;
    };
    assert!(step.levels().windows(2).all(|w| w[0] <= w[1]));
    let mut buf = Vec::new();
    step.write_csv(&mut buf).unwrap();
    let back = MonotoneStepFn::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.knots(), step.knots());
    assert_eq!(back.levels(), step.levels());
});
