//! Plain (P2) portable graymaps of per-patch masks, one pixel per patch
//! times an integer scale factor.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tokenpress_core::{Error as CoreError, GridShape, Provenance};

use crate::error::{Error, Result};
use crate::output::{read_meta, ResultsIndex};

pub const MAX_LEVEL: u8 = 255;
pub const REDUNDANT_LEVEL: u8 = 255;
/// Kept by the global branch (alone or together with the local branch).
pub const GLOBAL_LEVEL: u8 = 255;
/// Kept by the local branch only, or as a minimum-retention fallback.
pub const LOCAL_LEVEL: u8 = 128;
pub const DROPPED_LEVEL: u8 = 0;

/// Renders `levels` (row-major, one per patch) as a P2 graymap.
pub fn render_pgm(levels: &[u8], grid: GridShape, scale: usize) -> Result<String> {
    if grid.cells() != levels.len() {
        return Err(Error::core(
            "mask",
            CoreError::GridMismatch {
                rows: grid.rows,
                cols: grid.cols,
                n_tokens: levels.len(),
            },
        ));
    }
    if scale == 0 {
        return Err(Error::Usage("mask scale must be at least 1".into()));
    }
    let (w, h) = (grid.cols * scale, grid.rows * scale);
    let mut s = format!("P2\n{w} {h}\n{MAX_LEVEL}\n");
    for row in levels.chunks_exact(grid.cols) {
        let mut line = String::new();
        for &v in row {
            for _ in 0..scale {
                if !line.is_empty() {
                    line.push(' ');
                }
                write!(line, "{v}").unwrap();
            }
        }
        for _ in 0..scale {
            s += &line;
            s.push('\n');
        }
    }
    Ok(s)
}

pub fn redundancy_levels(mask: &[bool]) -> Vec<u8> {
    mask.iter()
        .map(|&r| if r { REDUNDANT_LEVEL } else { DROPPED_LEVEL })
        .collect()
}

pub fn selection_levels(n_tokens: usize, retained: &[usize], provenance: &[Provenance]) -> Vec<u8> {
    let mut levels = vec![DROPPED_LEVEL; n_tokens];
    for (&i, &p) in retained.iter().zip(provenance) {
        levels[i] = match p {
            Provenance::Global | Provenance::Both => GLOBAL_LEVEL,
            Provenance::Local | Provenance::Fallback => LOCAL_LEVEL,
        };
    }
    levels
}

fn parse_provenance(s: &str) -> Option<Provenance> {
    Some(match s {
        "global" => Provenance::Global,
        "local" => Provenance::Local,
        "both" => Provenance::Both,
        "fallback" => Provenance::Fallback,
        _ => return None,
    })
}

/// Writes `<id>_redundancy.pgm` and `<id>_selection.pgm` for every
/// compressed entry of a results directory. `grid_of` supplies the patch grid
/// per entry id. Returns the written paths.
pub fn render_masks(
    results_dir: &Path,
    index: &ResultsIndex,
    grid_of: impl Fn(&str) -> Option<GridShape>,
    out_dir: &Path,
    scale: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for entry in index.entries.iter().filter(|e| !e.is_global) {
        let meta = read_meta(results_dir, entry)?;
        let meta_path = results_dir.join(&entry.meta);
        let Some(c) = meta.compression else {
            return Err(Error::parse(
                &meta_path,
                "compressed entry lacks compression details",
            ));
        };
        let grid = grid_of(&entry.id).ok_or_else(|| {
            Error::Usage(format!("sub-image {:?} is not in the manifest", entry.id))
        })?;
        let mask: Vec<bool> = c.redundant_mask.iter().map(|&b| b != 0).collect();
        let provenance = c
            .provenance
            .iter()
            .map(|p| {
                parse_provenance(p)
                    .ok_or_else(|| Error::parse(&meta_path, format!("unknown provenance {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if c.retained_indices.iter().any(|&i| i >= meta.n_tokens)
            || provenance.len() != c.retained_indices.len()
        {
            return Err(Error::parse(
                &meta_path,
                "retained indices inconsistent with token count",
            ));
        }
        for (suffix, levels) in [
            ("redundancy", redundancy_levels(&mask)),
            (
                "selection",
                selection_levels(meta.n_tokens, &c.retained_indices, &provenance),
            ),
        ] {
            let path = out_dir.join(format!("{}_{suffix}.pgm", entry.id));
            let pgm = render_pgm(&levels, grid, scale)?;
            fs::write(&path, pgm).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_scale() {
        let pgm = render_pgm(&[0, 255, 128, 0], GridShape::new(2, 2), 1).unwrap();
        assert_eq!(pgm, "P2\n2 2\n255\n0 255\n128 0\n");
        let pgm = render_pgm(&[1, 2], GridShape::new(1, 2), 2).unwrap();
        assert_eq!(pgm, "P2\n4 2\n255\n1 1 2 2\n1 1 2 2\n");
    }

    #[test]
    fn grid_mismatch() {
        let err = render_pgm(&[0; 5], GridShape::new(2, 2), 1).unwrap_err();
        assert_eq!(err.kind(), "GridMismatch");
    }

    #[test]
    fn all_redundant_is_uniformly_bright() {
        let pgm = render_pgm(&redundancy_levels(&[true; 4]), GridShape::new(2, 2), 1).unwrap();
        assert!(pgm.lines().skip(3).all(|l| l == "255 255"));
    }

    #[test]
    fn full_retention_has_no_dropped_level() {
        let levels = selection_levels(
            3,
            &[0, 1, 2],
            &[Provenance::Global, Provenance::Local, Provenance::Both],
        );
        assert_eq!(levels, vec![GLOBAL_LEVEL, LOCAL_LEVEL, GLOBAL_LEVEL]);
        assert!(!levels.contains(&DROPPED_LEVEL));
    }
}
