use std::io::Write;

use cbs_core::config::RunConfig;
use cbs_core::experiments::run_swap_timing;
use cbs_core::output::Table;
use cbs_core::Preset;

fn write(src: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(src.as_bytes()).unwrap();
    f
}

#[test]
fn empty_file_with_preset_is_the_preset() {
    let f = write("");
    let cfg = RunConfig::load(f.path(), Some(Preset::Fig3)).unwrap();
    assert_eq!(cfg, RunConfig::from_preset(Preset::Fig3));
}

#[test]
fn flag_layer_overrides_file_and_preset() {
    let f = write("preset = \"fig3\"\n[effective]\nalpha2 = 5\n");
    let mut cfg = RunConfig::load(f.path(), None).unwrap();
    assert_eq!(cfg.model.alpha2, 5.0);
    // flags are applied after loading
    cfg.model.alpha2 = 7.0;
    assert!((cfg.effective().unwrap().alpha2() - 7.0).abs() < 1e-12);
}

#[test]
fn error_messages_carry_location() {
    let f = write("preset = \"fig3\"\n\n[dissipation]\nkappa = \"two\"\n");
    let msg = RunConfig::load(f.path(), None).unwrap_err().to_string();
    assert!(msg.contains("line 4") && msg.contains("dissipation.kappa"), "{msg}");
    let missing = RunConfig::load(std::path::Path::new("/nonexistent/cfg.toml"), None).unwrap_err();
    assert!(missing.is_config());
}

#[test]
fn experiment_output_round_trips_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let t = run_swap_timing(&cfg).unwrap();
    let path = t.save(dir.path()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# experiment: swap_timing\n# code_version: "));
    assert!(text.contains("# preset: fig3"));
    assert!(text.contains("# effective: {"));
    let back = Table::read_csv(&path).unwrap();
    assert_eq!(back.columns, t.columns);
    assert_eq!(back.rows.len(), t.rows.len());
    // identical config, identical bytes
    assert_eq!(run_swap_timing(&cfg).unwrap().to_csv_string(), text);
}
