//! Fixture builders and a process runner shared by the CLI test suites.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use wsol_core::formats::{write_box_records, write_wslm, BoxRecord};
use wsol_core::geometry::BBox;
use wsol_core::heatmap::LocMap;

pub fn wsol() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wsol"))
}

pub struct CmdResult {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_wsol(args: &[&str]) -> CmdResult {
    let output = wsol().args(args).output().expect("spawn wsol");
    CmdResult {
        status: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

pub fn summary_of(result: &CmdResult) -> serde_json::Value {
    serde_json::from_str(result.stdout.trim()).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {:?} / stderr: {:?}",
            result.stdout, result.stderr
        )
    })
}

pub fn bbox(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> BBox {
    BBox::new(x_min, y_min, x_max, y_max).unwrap()
}

/// Indicator map of a box inside a w x h frame.
pub fn indicator_map(w: usize, h: usize, inside: &BBox) -> LocMap {
    LocMap::from_fn(w, h, |x, y| {
        if inside.contains_point(x as f64, y as f64) {
            1.0
        } else {
            0.0
        }
    })
    .unwrap()
}

/// Writes `<id>.wslm` indicator maps plus a matching ground-truth JSONL.
/// Returns (maps_dir, boxes_path).
pub fn indicator_fixture(
    root: &Path,
    frame: (usize, usize),
    items: &[(&str, BBox, BBox)], // (id, map box, gt box)
) -> (PathBuf, PathBuf) {
    let maps_dir = root.join("maps");
    std::fs::create_dir_all(&maps_dir).unwrap();
    let mut records = Vec::new();
    for (id, map_box, gt) in items {
        let map = indicator_map(frame.0, frame.1, map_box);
        write_wslm(&maps_dir.join(format!("{id}.wslm")), &map).unwrap();
        records.push(BoxRecord {
            image_id: (*id).to_owned(),
            bbox: *gt,
            image_width: Some(frame.0 as u32),
            image_height: Some(frame.1 as u32),
        });
    }
    let boxes_path = root.join("gt.jsonl");
    write_box_records(&boxes_path, &records).unwrap();
    (maps_dir, boxes_path)
}
