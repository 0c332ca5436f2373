use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::imaging::{decode_pgm, decode_ppm, RgbImage};
use crate::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 6] = ["ppm", "pgm", "png", "jpg", "jpeg", "pnm"];

pub fn is_image_path(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Reads PPM/PGM with the built-in decoders and PNG/JPEG through `image`.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P6") {
        return decode_ppm(&bytes);
    }
    if bytes.starts_with(b"P5") {
        let g = decode_pgm(&bytes)?;
        return RgbImage::from_fn(g.width(), g.height(), |x, y| [g.get(x, y); 3]);
    }
    let img = image::load_from_memory(&bytes)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    RgbImage::new(w, h, img.pixels().map(|p| p.0).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub dir: String,
    pub label: String,
    pub healthy: bool,
    pub files: Vec<PathBuf>,
}

/// Class directories under a root, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub classes: Vec<ClassEntry>,
    pub warnings: Vec<String>,
}

/// A directory is a healthy class when its name contains "healthy" in any
/// letter case.
pub fn is_healthy_name(name: &str) -> bool {
    name.to_lowercase().contains("healthy")
}

/// One class per subdirectory of `root`, labelled by the directory name.
/// Directories without image files are skipped with a warning.
pub fn ingest(root: &Path) -> Result<CorpusManifest> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{} is not a directory", root.display())));
    }
    let mut dirs: Vec<(String, PathBuf)> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .collect();
    dirs.sort();
    let mut classes = Vec::new();
    let mut warnings = Vec::new();
    for (name, path) in dirs {
        let mut files: Vec<PathBuf> = fs::read_dir(&path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file() && is_image_path(p))
            .collect();
        files.sort();
        if files.is_empty() {
            warnings.push(format!("{name}: no image files, skipped"));
            continue;
        }
        classes.push(ClassEntry {
            healthy: is_healthy_name(&name),
            label: name.clone(),
            dir: name,
            files,
        });
    }
    if classes.is_empty() {
        return Err(Error::Dataset(format!(
            "{} has no class directories with images",
            root.display()
        )));
    }
    Ok(CorpusManifest {
        root: root.to_path_buf(),
        classes,
        warnings,
    })
}

impl CorpusManifest {
    /// `(class index, path)` for every image in manifest order.
    pub fn images(&self) -> Vec<(usize, &Path)> {
        self.classes
            .iter()
            .enumerate()
            .flat_map(|(c, e)| e.files.iter().map(move |f| (c, f.as_path())))
            .collect()
    }

    pub fn n_images(&self) -> usize {
        self.classes.iter().map(|c| c.files.len()).sum()
    }

    /// Path relative to the root, with `/` separators.
    pub fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }
}
