//! Workspace manifest: declares splits, artifact files, and defaults, and
//! supports a full referential check of everything it names.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wsol_core::formats::{load_locmap, read_box_records, read_run_manifest};
use wsol_core::proposals::ingest_proposals;

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    /// Base directory for relative artifact paths; defaults to the manifest's
    /// own directory.
    #[serde(default)]
    pub root: Option<PathBuf>,
    #[serde(default)]
    pub splits: Splits,
    #[serde(default)]
    pub artifacts: Vec<ArtifactDecl>,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Splits {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub val: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ArtifactDecl {
    pub name: String,
    pub kind: ArtifactKind,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    LocmapDir,
    Locmap,
    Boxes,
    Proposals,
    RunManifest,
    ImageDir,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Defaults {
    pub grid: usize,
    pub delta: f64,
    pub connectivity: u8,
    pub seed: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            grid: 1000,
            delta: 0.5,
            connectivity: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub path: PathBuf,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub entries: Vec<CheckEntry>,
}

impl WorkspaceManifest {
    pub fn load(path: &Path) -> wsol_core::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| wsol_core::Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| wsol_core::Error::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }

    fn known_ids(&self) -> BTreeSet<&str> {
        self.splits
            .train
            .iter()
            .chain(&self.splits.val)
            .chain(&self.splits.test)
            .map(String::as_str)
            .collect()
    }
}

/// Checks split disjointness and every declared artifact; failures are report
/// entries, never hard errors.
pub fn validate_workspace(manifest: &WorkspaceManifest, manifest_dir: &Path) -> ValidationReport {
    let root = match &manifest.root {
        Some(root) if root.is_absolute() => root.clone(),
        Some(root) => manifest_dir.join(root),
        None => manifest_dir.to_owned(),
    };
    let mut entries = Vec::new();

    let mut seen = BTreeSet::new();
    let mut overlap = Vec::new();
    for id in manifest
        .splits
        .train
        .iter()
        .chain(&manifest.splits.val)
        .chain(&manifest.splits.test)
    {
        if !seen.insert(id.as_str()) {
            overlap.push(id.clone());
        }
    }
    entries.push(CheckEntry {
        name: "splits".into(),
        path: PathBuf::new(),
        ok: overlap.is_empty(),
        detail: if overlap.is_empty() {
            "split lists are disjoint".into()
        } else {
            format!("image ids in more than one split: {overlap:?}")
        },
    });

    let known = manifest.known_ids();
    for artifact in &manifest.artifacts {
        let path = if artifact.path.is_absolute() {
            artifact.path.clone()
        } else {
            root.join(&artifact.path)
        };
        let result = check_artifact(artifact.kind, &path, &known);
        entries.push(CheckEntry {
            name: artifact.name.clone(),
            path,
            ok: result.is_ok(),
            detail: match result {
                Ok(detail) => detail,
                Err(detail) => detail,
            },
        });
    }

    ValidationReport {
        ok: entries.iter().all(|e| e.ok),
        entries,
    }
}

fn check_artifact(
    kind: ArtifactKind,
    path: &Path,
    known_ids: &BTreeSet<&str>,
) -> std::result::Result<String, String> {
    let check_ids = |ids: Vec<String>| -> std::result::Result<(), String> {
        if known_ids.is_empty() {
            return Ok(());
        }
        let unknown: Vec<&String> = ids
            .iter()
            .filter(|id| !known_ids.contains(id.as_str()))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(format!("unknown image ids (not in any split): {unknown:?}"))
        }
    };

    match kind {
        ArtifactKind::Locmap => {
            load_locmap(path).map_err(|e| e.to_string())?;
            Ok("map parses".into())
        }
        ArtifactKind::LocmapDir => {
            let mut count = 0usize;
            let entries = std::fs::read_dir(path).map_err(|e| e.to_string())?;
            for entry in entries {
                let entry = entry.map_err(|e| e.to_string())?;
                let file = entry.path();
                if matches!(
                    file.extension().and_then(|e| e.to_str()),
                    Some("wslm") | Some("png")
                ) {
                    load_locmap(&file).map_err(|e| e.to_string())?;
                    count += 1;
                }
            }
            Ok(format!("{count} maps parse"))
        }
        ArtifactKind::Boxes => {
            let records = read_box_records(path).map_err(|e| e.to_string())?;
            check_ids(records.iter().map(|r| r.image_id.clone()).collect())?;
            Ok(format!("{} box rows parse", records.len()))
        }
        ArtifactKind::Proposals => {
            let outcome = ingest_proposals(path, None).map_err(|e| e.to_string())?;
            if !outcome.rejected.is_empty() {
                return Err(format!(
                    "{} rejected rows, first at line {}: {}",
                    outcome.rejected.len(),
                    outcome.rejected[0].line,
                    outcome.rejected[0].reason
                ));
            }
            check_ids(outcome.accepted.iter().map(|r| r.image_id.clone()).collect())?;
            Ok(format!("{} proposal rows parse", outcome.accepted.len()))
        }
        ArtifactKind::RunManifest => {
            let manifest = read_run_manifest(path).map_err(|e| e.to_string())?;
            Ok(format!(
                "run `{}` with {} validation epochs",
                manifest.run_id,
                manifest.val.len()
            ))
        }
        ArtifactKind::ImageDir => {
            let mut count = 0usize;
            let entries = std::fs::read_dir(path).map_err(|e| e.to_string())?;
            for entry in entries {
                let entry = entry.map_err(|e| e.to_string())?;
                let file = entry.path();
                if matches!(
                    file.extension().and_then(|e| e.to_str()),
                    Some("png") | Some("ppm")
                ) {
                    wsol_core::formats::load_rgb_image(&file).map_err(|e| e.to_string())?;
                    count += 1;
                }
            }
            Ok(format!("{count} images parse"))
        }
    }
}
