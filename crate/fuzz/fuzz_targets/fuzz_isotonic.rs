#![no_main]

use eb_fission::fit_isotonic;
use libfuzzer_sys::fuzz_target;

// Input is read as consecutive (x, y, w) triples of little-endian f64.
fuzz_target!(|data: &[u8]| {
    let vals: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for t in vals.chunks_exact(3) {
        x.push(t[0]);
        y.push(t[1]);
        w.push(t[2]);
    }
    let Ok(fit) = fit_isotonic(&x, &y, &w) else {
        return;
    };
    assert!(fit.levels().windows(2).all(|p| p[0] <= p[1]));
    let mut prev = f64::NEG_INFINITY;
    let mut xs = x.clone();
    xs.sort_by(f64::total_cmp);
    for v in xs {
        let p = fit.predict(v);
        assert!(p >= prev);
        prev = p;
    }
});
