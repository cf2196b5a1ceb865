#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = serde_json::from_slice::<RunConfig>(data) else { return };
    if cfg.validate().is_ok() {
        assert_eq!(cfg.config_hash().len(), 64);
        for name in cfg.symbol_names() {
            assert!(!cfg.lambdas_for(&name).is_empty());
        }
    }
});
