#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc::artifact::{read_follower_artifact, write_follower_artifact};

fuzz_target!(|data: &[u8]| {
    let Ok(a) = read_follower_artifact(data) else { return };
    let mut out = Vec::new();
    write_follower_artifact(&mut out, &a).unwrap();
    assert_eq!(read_follower_artifact(&out).unwrap().kernel, a.kernel);
});
