#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc::artifact::{read_kernel_artifact, write_kernel_artifact};

fuzz_target!(|data: &[u8]| {
    let Ok(a) = read_kernel_artifact(data) else { return };
    let mut out = Vec::new();
    write_kernel_artifact(&mut out, &a).unwrap();
    assert_eq!(read_kernel_artifact(&out).unwrap().kernel, a.kernel);
});
