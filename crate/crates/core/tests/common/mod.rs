#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::path::{Path, PathBuf};

use btq::parser::{parse, SourceFile};
use btq::BehaviorTreeModel;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> PathBuf {
    repo_root().join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn lab_model() -> BehaviorTreeModel {
    let text = read_fixture("lab_mission.btq");
    parse(&SourceFile::new("lab_mission.btq", &text)).unwrap_or_else(|d| panic!("{d:#?}"))
}

pub const RF: &str = "/MainTree/ReactiveFallback#1";
pub const BATTERY_CHECK: &str = "/MainTree/ReactiveFallback#1/BatteryCheck#1";
pub const SOLID_STATION: &str = "/MainTree/ReactiveFallback#1/SolidStation#1";
pub const REPEAT: &str = "/MainTree/ReactiveFallback#1/SolidStation#1/Repeat#1";
