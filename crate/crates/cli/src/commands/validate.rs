use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;

use crate::workspace::{validate_workspace, WorkspaceManifest};

#[derive(clap::Args)]
pub struct Args {
    /// Workspace manifest JSON.
    #[arg(long)]
    manifest: PathBuf,

    /// Optional report JSON file.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    let manifest = WorkspaceManifest::load(&args.manifest)?;
    let dir = args
        .manifest
        .parent()
        .map(|p| p.to_owned())
        .unwrap_or_else(|| PathBuf::from("."));
    let report = validate_workspace(&manifest, &dir);
    let summary = json!({
        "command": "validate",
        "ok": report.ok,
        "entries": report.entries,
    });
    if let Some(path) = &args.out {
        wsol_core::formats::write_json(path, &summary)?;
    }
    Ok(summary)
}
