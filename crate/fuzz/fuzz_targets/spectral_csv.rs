#![no_main]

use fhn_core::io;
use libfuzzer_sys::fuzz_target;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = io::read_spectral(data) else { return };
    let mut buf = Vec::new();
    io::write_spectral(&mut buf, &parsed).expect("decoded value encodes");
    let again = io::read_spectral(buf.as_slice()).expect("encoded value decodes");
    assert_eq!(bits(&again.u), bits(&parsed.u));
    assert_eq!(bits(&again.v), bits(&parsed.v));
});
