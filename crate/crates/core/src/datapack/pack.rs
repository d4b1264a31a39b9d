use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Tensor2;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub name: String,
    pub dim: usize,
}

impl ModalitySpec {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }

    /// audio 128, scene 512, expression 3072, action 128.
    pub fn defaults() -> Vec<ModalitySpec> {
        vec![
            Self::new("audio", 128),
            Self::new("scene", 512),
            Self::new("expression", 3072),
            Self::new("action", 128),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestModality {
    pub name: String,
    pub dim: usize,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub movie_id: String,
    pub seconds: usize,
    pub modalities: Vec<ManifestModality>,
    pub labels_file: String,
}

/// One movie: per-second features per modality and per-second
/// `(valence, arousal)` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MoviePack {
    pub movie_id: String,
    pub seconds: usize,
    pub features: IndexMap<String, Tensor2>,
    pub labels: Tensor2,
}

impl MoviePack {
    pub fn modality_specs(&self) -> Vec<ModalitySpec> {
        self.features
            .iter()
            .map(|(n, t)| ModalitySpec::new(n.clone(), t.cols()))
            .collect()
    }

    pub fn valence(&self) -> Vec<f64> {
        self.labels.col_values(0)
    }

    pub fn arousal(&self) -> Vec<f64> {
        self.labels.col_values(1)
    }

    /// Checks row counts, label range, and finiteness.
    pub fn validate(&self) -> Result<()> {
        let origin = PathBuf::from(&self.movie_id);
        for (name, t) in &self.features {
            if t.cols() == 0 {
                return Err(Error::Data(format!("modality {name} has zero width")));
            }
            if t.rows() != self.seconds {
                return Err(Error::RowCount {
                    file: origin.join(name),
                    expected: self.seconds,
                    found: t.rows(),
                });
            }
            if !t.is_finite() {
                return Err(Error::Data(format!("modality {name} contains non-finite values")));
            }
        }
        check_labels(&self.labels, self.seconds, &origin.join("labels"))
    }
}

fn check_labels(labels: &Tensor2, seconds: usize, file: &Path) -> Result<()> {
    if labels.cols() != 2 {
        return Err(Error::DimMismatch {
            file: file.to_path_buf(),
            dim: 2,
            found: labels.data().len(),
        });
    }
    if labels.rows() != seconds {
        return Err(Error::RowCount {
            file: file.to_path_buf(),
            expected: seconds,
            found: labels.rows(),
        });
    }
    for row in 0..labels.rows() {
        for &value in labels.row(row) {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::LabelRange {
                    file: file.to_path_buf(),
                    row,
                    value,
                });
            }
        }
    }
    Ok(())
}

fn read_f32_matrix(path: &Path, dim: usize, seconds: usize) -> Result<Tensor2> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Data(format!(
            "{}: {} bytes is not a whole number of 32-bit values",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if !values.len().is_multiple_of(dim) {
        return Err(Error::DimMismatch {
            file: path.to_path_buf(),
            dim,
            found: values.len(),
        });
    }
    let rows = values.len() / dim;
    if rows != seconds {
        return Err(Error::RowCount {
            file: path.to_path_buf(),
            expected: seconds,
            found: rows,
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "{}: non-finite value at row {}",
            path.display(),
            i / dim
        )));
    }
    Tensor2::from_vec(rows, dim, values)
}

fn write_f32_matrix(path: &Path, t: &Tensor2) -> Result<()> {
    let mut bytes = Vec::with_capacity(t.data().len() * 4);
    for &v in t.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads and validates one feature-pack directory.
pub fn load_pack(dir: impl AsRef<Path>) -> Result<MoviePack> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(Error::MissingFile(manifest_path));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    let mut features = IndexMap::new();
    for m in &manifest.modalities {
        if m.dim == 0 {
            return Err(Error::Data(format!("modality {} declares dim 0", m.name)));
        }
        if features.contains_key(&m.name) {
            return Err(Error::Data(format!("modality {} declared twice", m.name)));
        }
        let t = read_f32_matrix(&dir.join(&m.file), m.dim, manifest.seconds)?;
        features.insert(m.name.clone(), t);
    }
    let labels_path = dir.join(&manifest.labels_file);
    let labels = read_f32_matrix(&labels_path, 2, manifest.seconds)?;
    check_labels(&labels, manifest.seconds, &labels_path)?;
    Ok(MoviePack {
        movie_id: manifest.movie_id,
        seconds: manifest.seconds,
        features,
        labels,
    })
}

/// Writes `pack` as a feature-pack directory (created if absent).
pub fn write_pack(pack: &MoviePack, dir: impl AsRef<Path>) -> Result<()> {
    pack.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut modalities = Vec::new();
    for (name, t) in &pack.features {
        let file = format!("{name}.f32");
        write_f32_matrix(&dir.join(&file), t)?;
        modalities.push(ManifestModality {
            name: name.clone(),
            dim: t.cols(),
            file,
        });
    }
    let labels_file = "labels.f32".to_string();
    write_f32_matrix(&dir.join(&labels_file), &pack.labels)?;
    let manifest = Manifest {
        movie_id: pack.movie_id.clone(),
        seconds: pack.seconds,
        modalities,
        labels_file,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Loads every immediate subdirectory of `root` that holds a manifest,
/// sorted by directory name. A `root` that is itself a pack loads alone.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<MoviePack>> {
    let root = root.as_ref();
    if root.join(MANIFEST).is_file() {
        return Ok(vec![load_pack(root)?]);
    }
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Data(format!("no feature packs under {}", root.display())));
    }
    dirs.iter().map(load_pack).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_pack(seconds: usize) -> MoviePack {
        let mut features = IndexMap::new();
        features.insert(
            "audio".to_string(),
            Tensor2::from_vec(seconds, 3, (0..seconds * 3).map(|v| v as f64 * 0.1).collect()).unwrap(),
        );
        features.insert("scene".to_string(), Tensor2::filled(seconds, 2, -0.5));
        let labels = Tensor2::from_vec(
            seconds,
            2,
            (0..seconds * 2).map(|v| ((v as f64) * 0.37).sin()).collect(),
        )
        .unwrap();
        MoviePack {
            movie_id: "m".into(),
            seconds,
            features,
            labels,
        }
    }

    #[test]
    fn well_formed_pack_loads() {
        let dir = tempfile::tempdir().unwrap();
        write_pack(&small_pack(30), dir.path()).unwrap();
        let p = load_pack(dir.path()).unwrap();
        assert_eq!(p.features.len(), 2);
        assert!(p.features.values().all(|t| t.rows() == 30));
    }

    #[test]
    fn short_modality_file_is_a_row_count_error() {
        let dir = tempfile::tempdir().unwrap();
        write_pack(&small_pack(30), dir.path()).unwrap();
        let short = small_pack(29);
        write_f32_matrix(&dir.path().join("audio.f32"), &short.features["audio"]).unwrap();
        match load_pack(dir.path()) {
            Err(Error::RowCount { file, expected, found }) => {
                assert!(file.ends_with("audio.f32"));
                assert_eq!((expected, found), (30, 29));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn label_out_of_range_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let pack = small_pack(12);
        write_pack(&pack, dir.path()).unwrap();
        let mut labels = pack.labels.clone();
        labels.set(7, 0, 1.5);
        write_f32_matrix(&dir.path().join("labels.f32"), &labels).unwrap();
        match load_pack(dir.path()) {
            Err(Error::LabelRange { row, value, .. }) => {
                assert_eq!(row, 7);
                assert_eq!(value, 1.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_misshapen_files() {
        let dir = tempfile::tempdir().unwrap();
        write_pack(&small_pack(10), dir.path()).unwrap();
        fs::write(dir.path().join("scene.f32"), vec![0u8; 4 * 7]).unwrap();
        assert!(matches!(load_pack(dir.path()), Err(Error::DimMismatch { .. })));
        fs::remove_file(dir.path().join("scene.f32")).unwrap();
        assert!(matches!(load_pack(dir.path()), Err(Error::MissingFile(_))));
        assert!(matches!(
            load_pack(dir.path().join("nowhere")),
            Err(Error::MissingFile(_))
        ));
    }
}
