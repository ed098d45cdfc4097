//! Triplet directories: a `triplets.txt` manifest naming one triplet per
//! line, stored as `<name>_0.pgm`, `<name>_1.pgm`, `<name>_2.pgm`.

use std::path::{Path, PathBuf};

use dan_core::image::{histogram_specification, Triplet};

use crate::pgm::{read_pgm_file, write_pgm_file, PgmError};

pub const MANIFEST: &str = "triplets.txt";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error("triplet {name}: {message}")]
    Triplet { name: String, message: String },
    #[error("dataset {0} lists no triplets")]
    Empty(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn frame_path(root: &Path, name: &str, index: usize) -> PathBuf {
    root.join(format!("{name}_{index}.pgm"))
}

/// Names from the manifest; blank lines are skipped.
pub fn read_manifest(root: &Path) -> Result<Vec<String>, DatasetError> {
    let path = root.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn load_triplet(root: &Path, name: &str) -> Result<Triplet, DatasetError> {
    let [a, b, c] = [0, 1, 2].map(|i| read_pgm_file(&frame_path(root, name, i)));
    Triplet::new(a?, b?, c?).map_err(|e| DatasetError::Triplet {
        name: name.into(),
        message: e.to_string(),
    })
}

/// Every listed triplet, failing on the first unreadable one.
pub fn load_dataset(root: &Path) -> Result<Vec<(String, Triplet)>, DatasetError> {
    read_manifest(root)?
        .into_iter()
        .map(|name| load_triplet(root, &name).map(|t| (name, t)))
        .collect()
}

pub fn write_triplet(root: &Path, name: &str, t: &Triplet) -> Result<(), DatasetError> {
    for (i, img) in [&t.prev, &t.mid, &t.next].into_iter().enumerate() {
        write_pgm_file(&frame_path(root, name, i), img)?;
    }
    Ok(())
}

/// Writes the frames and a manifest listing `items` in order.
pub fn write_dataset(root: &Path, items: &[(String, Triplet)]) -> Result<(), DatasetError> {
    std::fs::create_dir_all(root).map_err(io(root))?;
    let mut manifest = String::new();
    for (name, t) in items {
        write_triplet(root, name, t)?;
        manifest.push_str(name);
        manifest.push('\n');
    }
    let path = root.join(MANIFEST);
    std::fs::write(&path, manifest).map_err(io(&path))
}

/// Where histogram specification takes its reference from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HistogramReference {
    /// The first frame of the first triplet.
    FirstFrame,
    File(PathBuf),
    Off,
}

/// Matches every frame to the reference histogram.
pub fn specify_histograms(
    items: &mut [(String, Triplet)],
    reference: &HistogramReference,
) -> Result<(), DatasetError> {
    let hist = match reference {
        HistogramReference::Off => return Ok(()),
        HistogramReference::File(p) => read_pgm_file(p)?.histogram(),
        HistogramReference::FirstFrame => match items.first() {
            Some((_, t)) => t.prev.histogram(),
            None => return Ok(()),
        },
    };
    for (name, t) in items.iter_mut() {
        *t = t
            .map(|img| histogram_specification(img, &hist))
            .map_err(|e| DatasetError::Triplet {
                name: name.clone(),
                message: e.to_string(),
            })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dan_core::image::make_synthetic_triplet;

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let items: Vec<_> = (0..3)
            .map(|i| (format!("t{i}"), make_synthetic_triplet(24, 20, i, 2).unwrap()))
            .collect();
        write_dataset(dir.path(), &items).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), items);
    }

    #[test]
    fn missing_frame_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let t = make_synthetic_triplet(16, 16, 1, 1).unwrap();
        write_dataset(dir.path(), &[("a".into(), t)]).unwrap();
        std::fs::remove_file(frame_path(dir.path(), "a", 2)).unwrap();
        assert!(load_triplet(dir.path(), "a").is_err());
    }

    #[test]
    fn first_frame_reference_leaves_that_frame_unchanged() {
        let mut items: Vec<_> = (0..2)
            .map(|i| (format!("t{i}"), make_synthetic_triplet(16, 16, i, 1).unwrap()))
            .collect();
        let first = items[0].1.prev.clone();
        specify_histograms(&mut items, &HistogramReference::FirstFrame).unwrap();
        assert_eq!(items[0].1.prev, first);
    }
}
