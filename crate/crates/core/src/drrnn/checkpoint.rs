use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::hyper::HyperParams;
use super::model::{allocate, DrrNet, ModelCheckpoint};
use crate::container::Container;
use crate::{Error, Result};

pub const CHECKPOINT_KIND: &str = "drrnn-checkpoint";

#[derive(Serialize, Deserialize)]
struct Meta {
    hp: HyperParams,
    best_val_acc: f64,
    best_epoch: usize,
    split_id: (usize, usize),
}

pub fn checkpoint_to_container(m: &ModelCheckpoint) -> Container {
    let meta = Meta {
        hp: m.net.hp.clone(),
        best_val_acc: m.best_val_acc,
        best_epoch: m.best_epoch,
        split_id: m.split_id,
    };
    let mut c = Container::new(CHECKPOINT_KIND, serde_json::to_value(meta).expect("meta serializes"));
    for p in &m.net.params {
        c.push(p.name.clone(), p.shape.clone(), p.values.clone());
    }
    c
}

pub fn checkpoint_from_container(c: &Container) -> Result<ModelCheckpoint> {
    if c.kind != CHECKPOINT_KIND {
        return Err(Error::Container(format!("expected a `{CHECKPOINT_KIND}`, found `{}`", c.kind)));
    }
    let meta: Meta = serde_json::from_value(c.meta.clone()).map_err(|e| Error::Container(format!("meta: {e}")))?;
    meta.hp.validate()?;
    let mut params = allocate(&meta.hp);
    if c.arrays.len() != params.len() {
        return Err(Error::Shape(format!("{} arrays stored, architecture has {}", c.arrays.len(), params.len())));
    }
    for p in &mut params {
        p.values = c.expect(&p.name, &p.shape)?.to_vec();
    }
    Ok(ModelCheckpoint {
        net: DrrNet { hp: meta.hp, params },
        best_val_acc: meta.best_val_acc,
        best_epoch: meta.best_epoch,
        split_id: meta.split_id,
    })
}

pub fn save_checkpoint(m: &ModelCheckpoint, path: &Path) -> Result<()> {
    checkpoint_to_container(m).save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    checkpoint_from_container(&Container::load(path)?)
}

/// Ordered checkpoint paths, one per line, relative to the manifest.
pub fn write_manifest(paths: &[PathBuf], manifest: &Path) -> Result<()> {
    let base = manifest.parent().unwrap_or(Path::new(""));
    let mut text = String::new();
    for p in paths {
        let rel = p.strip_prefix(base).unwrap_or(p);
        text.push_str(&rel.to_string_lossy());
        text.push('\n');
    }
    fs::write(manifest, text).map_err(|e| Error::io(manifest, e))
}

pub fn read_manifest(manifest: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(|l| base.join(l)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drrnn::build_model;
    use crate::rng::RngStream;

    fn sample() -> ModelCheckpoint {
        let hp = HyperParams { input_dim: 6, block_dim: 4, n_blocks: 2, ..Default::default() };
        ModelCheckpoint {
            net: build_model(&hp, &mut RngStream::new(3)).unwrap(),
            best_val_acc: 0.7133333333333333,
            best_epoch: 412,
            split_id: (2, 4),
        }
    }

    #[test]
    fn round_trip_bit_identical() {
        let m = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qcls");
        save_checkpoint(&m, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.net.params.iter().zip(&back.net.params) {
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn wrong_version_tag() {
        let mut bytes = checkpoint_to_container(&sample()).to_bytes();
        bytes[4] = 2;
        let c = Container::from_bytes(&bytes);
        assert!(matches!(c, Err(Error::Version { found: 2, .. })));
    }

    #[test]
    fn shape_disagreeing_with_architecture() {
        let m = sample();
        let mut c = checkpoint_to_container(&m);
        c.arrays[2].shape = vec![2, 8];
        assert!(matches!(checkpoint_from_container(&c), Err(Error::Shape(_))));
    }

    #[test]
    fn manifest_paths_resolve_relative() {
        let dir = tempfile::tempdir().unwrap();
        let paths = vec![dir.path().join("models/a.qcls"), dir.path().join("models/b.qcls")];
        let manifest = dir.path().join("manifest.txt");
        write_manifest(&paths, &manifest).unwrap();
        assert_eq!(fs::read_to_string(&manifest).unwrap(), "models/a.qcls\nmodels/b.qcls\n");
        assert_eq!(read_manifest(&manifest).unwrap(), paths);
    }
}
