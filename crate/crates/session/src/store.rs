use std::io::Write;
use std::path::{Path, PathBuf};

use crate::types::ImageRef;

/// Content-addressed image files: `<root>/images/<hex digest>`.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(root.join("images"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, image: &ImageRef) -> PathBuf {
        self.root.join("images").join(image.digest())
    }

    /// Stores the bytes (idempotent) and returns their reference.
    pub fn put(&self, bytes: &[u8]) -> std::io::Result<ImageRef> {
        let image = ImageRef::for_bytes(bytes);
        let path = self.path(&image);
        if !path.exists() {
            // write-then-rename so readers never see a partial file
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(image)
    }

    pub fn get(&self, image: &ImageRef) -> std::io::Result<Vec<u8>> {
        std::fs::read(self.path(image))
    }

    pub fn contains(&self, image: &ImageRef) -> bool {
        self.path(image).is_file()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_is_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let a = store.put(b"one").unwrap();
        assert_eq!(store.put(b"one").unwrap(), a);
        assert_eq!(store.get(&a).unwrap(), b"one");
        assert!(store.contains(&a));
        assert!(!store.contains(&ImageRef::for_bytes(b"two")));
    }
}
