use std::fs;
use std::path::Path;

use wismc_cli::RunConfig;

#[test]
fn config_seeds_are_valid_configs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fuzz/corpus/run_config");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if !path.file_name().unwrap().to_string_lossy().starts_with("seed-") {
            continue;
        }
        let cfg: RunConfig = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n > 0);
}
