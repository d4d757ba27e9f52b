#![no_main]

use fhn_core::io;
use libfuzzer_sys::fuzz_target;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = io::read_state(data) else { return };
    let mut buf = Vec::new();
    io::write_state(&mut buf, &parsed).expect("decoded value encodes");
    let again = io::read_state(buf.as_slice()).expect("encoded value decodes");
    assert_eq!(bits(again.u.values()), bits(parsed.u.values()));
    assert_eq!(bits(again.v.values()), bits(parsed.v.values()));
});
