//! Network manifests: a JSON document naming the layers of a network and
//! where their tensors come from (TCLT files on disk, or a seeded generator).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{gen_synthetic, load_tensor, LayerSpec, Tensor16, ValueModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub sparsity: f64,
    #[serde(rename = "valueModel")]
    pub value_model: ValueModel,
    pub seed: u64,
}

/// One layer entry: the shape plus exactly one tensor source — either
/// `weightsPath` (with optional `activationsPath`) or a `generator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    #[serde(flatten)]
    pub layer: LayerSpec,
    #[serde(
        rename = "weightsPath",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub weights_path: Option<String>,
    #[serde(
        rename = "activationsPath",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub activations_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "networkName")]
    pub network_name: String,
    pub layers: Vec<ManifestLayer>,
}

/// A layer with its tensors in memory. Activations stay optional: schedules
/// and weight-skip timing never look at them.
#[derive(Debug, Clone)]
pub struct ResolvedLayer {
    /// Manifest position, used as the layer name in reports.
    pub index: usize,
    pub layer: LayerSpec,
    pub weights: Tensor16,
    pub activations: Option<Tensor16>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.network_name.is_empty() {
            return Err(Error::Manifest("networkName must not be empty".into()));
        }
        for (i, entry) in self.layers.iter().enumerate() {
            entry.layer.validate()?;
            match (&entry.weights_path, &entry.generator) {
                (Some(_), None) | (None, Some(_)) => {}
                (Some(_), Some(_)) => {
                    return Err(Error::Manifest(format!(
                        "layer {i}: weightsPath and generator are mutually exclusive"
                    )))
                }
                (None, None) => {
                    return Err(Error::Manifest(format!(
                        "layer {i}: needs weightsPath or a generator"
                    )))
                }
            }
            if entry.generator.is_some() && entry.activations_path.is_some() {
                return Err(Error::Manifest(format!(
                    "layer {i}: activationsPath conflicts with generator"
                )));
            }
            if let Some(g) = &entry.generator {
                if !(0.0..=1.0).contains(&g.sparsity) {
                    return Err(Error::Manifest(format!(
                        "layer {i}: sparsity {} outside [0, 1]",
                        g.sparsity
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Materialize every layer's tensors. Relative paths resolve against
    /// `base_dir` (normally the manifest's directory).
    pub fn resolve(&self, base_dir: &Path) -> Result<Vec<ResolvedLayer>> {
        self.validate()?;
        let locate = |rel: &str| -> PathBuf {
            let p = Path::new(rel);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let mut resolved = Vec::with_capacity(self.layers.len());
        for (index, entry) in self.layers.iter().enumerate() {
            let (weights, activations) = match &entry.generator {
                Some(g) => {
                    let (w, a) = gen_synthetic(&entry.layer, g.sparsity, g.value_model, g.seed)?;
                    (w, Some(a))
                }
                None => {
                    let wpath = entry.weights_path.as_deref().expect("validated source");
                    let w = load_tensor(&locate(wpath))?;
                    let a = match &entry.activations_path {
                        Some(ap) => Some(load_tensor(&locate(ap))?),
                        None => None,
                    };
                    (w, a)
                }
            };
            let wdims = [
                entry.layer.kk,
                entry.layer.fx,
                entry.layer.fy,
                entry.layer.c,
            ];
            if weights.dims() != wdims {
                return Err(Error::Manifest(format!(
                    "layer {index}: weight dims {:?} do not match layer {:?}",
                    weights.dims(),
                    wdims
                )));
            }
            if let Some(a) = &activations {
                let adims = [entry.layer.ax, entry.layer.ay, entry.layer.c];
                if a.dims() != adims {
                    return Err(Error::Manifest(format!(
                        "layer {index}: activation dims {:?} do not match layer {:?}",
                        a.dims(),
                        adims
                    )));
                }
            }
            resolved.push(ResolvedLayer {
                index,
                layer: entry.layer,
                weights,
                activations,
            });
        }
        Ok(resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::save_tensor;

    fn layer() -> LayerSpec {
        LayerSpec {
            ax: 4,
            ay: 4,
            c: 2,
            fx: 2,
            fy: 2,
            kk: 3,
            stride: 1,
            relu: true,
            precision_bits: 12,
        }
    }

    fn generated(seed: u64) -> ManifestLayer {
        ManifestLayer {
            layer: layer(),
            weights_path: None,
            activations_path: None,
            generator: Some(GeneratorSpec {
                sparsity: 0.5,
                value_model: ValueModel::UniformPBit,
                seed,
            }),
        }
    }

    #[test]
    fn json_field_spelling() {
        let m = Manifest {
            network_name: "net".into(),
            layers: vec![generated(1)],
        };
        let text = serde_json::to_string(&m).unwrap();
        for key in [
            "networkName",
            "precisionBits",
            "generator",
            "valueModel",
            "uniform-p-bit",
        ] {
            assert!(text.contains(key), "missing {key} in {text}");
        }
        assert!(!text.contains("weightsPath"));
        let back: Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn save_load_resolve_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            network_name: "two".into(),
            layers: vec![generated(3), generated(4)],
        };
        let path = dir.path().join("net.json");
        m.save(&path).unwrap();
        let loaded = Manifest::load(&path).unwrap();
        assert_eq!(loaded, m);
        let resolved = loaded.resolve(dir.path()).unwrap();
        assert_eq!(resolved.len(), 2);
        assert!(resolved[0].activations.is_some());
        assert_eq!(resolved[0].weights.dims(), &[3, 2, 2, 2]);
        // Same seed -> same tensors on re-resolution.
        let again = loaded.resolve(dir.path()).unwrap();
        assert_eq!(again[1].weights.data(), resolved[1].weights.data());
    }

    #[test]
    fn file_source_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let l = layer();
        let (w, a) = gen_synthetic(&l, 0.25, ValueModel::UniformPBit, 9).unwrap();
        save_tensor(&w, &dir.path().join("w.tclt")).unwrap();
        save_tensor(&a, &dir.path().join("a.tclt")).unwrap();
        let m = Manifest {
            network_name: "files".into(),
            layers: vec![ManifestLayer {
                layer: l,
                weights_path: Some("w.tclt".into()),
                activations_path: Some("a.tclt".into()),
                generator: None,
            }],
        };
        let resolved = m.resolve(dir.path()).unwrap();
        assert_eq!(resolved[0].weights.data(), w.data());
        assert_eq!(resolved[0].activations.as_ref().unwrap().data(), a.data());

        let missing = Manifest {
            network_name: "files".into(),
            layers: vec![ManifestLayer {
                layer: l,
                weights_path: Some("nope.tclt".into()),
                activations_path: None,
                generator: None,
            }],
        };
        let err = missing.resolve(dir.path()).unwrap_err();
        assert!(err.to_string().contains("nope.tclt"), "{err}");
    }

    #[test]
    fn source_rules_enforced() {
        let both = ManifestLayer {
            weights_path: Some("w.tclt".into()),
            ..generated(1)
        };
        let neither = ManifestLayer {
            generator: None,
            ..generated(1)
        };
        let acts_with_gen = ManifestLayer {
            activations_path: Some("a.tclt".into()),
            ..generated(1)
        };
        for bad in [both, neither, acts_with_gen] {
            let m = Manifest {
                network_name: "bad".into(),
                layers: vec![bad],
            };
            assert!(matches!(m.validate(), Err(Error::Manifest(_))));
        }
        let sparsity = ManifestLayer {
            generator: Some(GeneratorSpec {
                sparsity: 1.5,
                value_model: ValueModel::UniformPBit,
                seed: 0,
            }),
            ..generated(1)
        };
        let m = Manifest {
            network_name: "bad".into(),
            layers: vec![sparsity],
        };
        assert!(matches!(m.validate(), Err(Error::Manifest(_))));
    }

    #[test]
    fn dim_mismatch_caught_on_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let l = layer();
        let (w, _) = gen_synthetic(&l, 0.0, ValueModel::UniformPBit, 2).unwrap();
        save_tensor(&w, &dir.path().join("w.tclt")).unwrap();
        let mut wrong = l;
        wrong.kk = 4; // tensor on disk was built for kk = 3
        let m = Manifest {
            network_name: "net".into(),
            layers: vec![ManifestLayer {
                layer: wrong,
                weights_path: Some("w.tclt".into()),
                activations_path: None,
                generator: None,
            }],
        };
        assert!(matches!(m.resolve(dir.path()), Err(Error::Manifest(_))));
    }
}
