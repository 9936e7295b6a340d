use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use grouprobust::datagen::{load_csv, CsvSchema, Dataset};
use grouprobust::diffcore::Model;
#[cfg(test)]
use grouprobust::diffcore::{Activation, Architecture};
use sha2::{Digest, Sha256};

/// `sha256:<hex>` over the canonical CSV form, annotations included.
pub fn fingerprint(data: &Dataset) -> String {
    let digest = Sha256::digest(data.to_csv_string().as_bytes());
    format!("sha256:{}", hex::encode(digest))
}

/// Plain-text checkpoint: a short header, then one parameter per line in
/// scientific notation with 17 significant digits.
pub fn checkpoint_text(model: &Model) -> String {
    let arch = model.architecture();
    let hidden = if arch.hidden.is_empty() {
        "none".to_string()
    } else {
        arch.hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("x")
    };
    let mut out = String::new();
    writeln!(out, "# grouprobust checkpoint").unwrap();
    writeln!(out, "input_dim {}", arch.input_dim).unwrap();
    writeln!(out, "hidden {hidden}").unwrap();
    writeln!(out, "num_labels {}", arch.num_labels).unwrap();
    writeln!(out, "activation {}", model.activation().name()).unwrap();
    writeln!(out, "params {}", model.params().len()).unwrap();
    for p in model.params() {
        writeln!(out, "{p:.16e}").unwrap();
    }
    out
}

#[cfg(test)]
pub fn parse_checkpoint(text: &str) -> Result<Model> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let mut header = |key: &str| -> Result<String> {
        let line = lines.next().with_context(|| format!("checkpoint ends before `{key}`"))?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => bail!("expected `{key}`, found `{line}`"),
        }
    };
    let input_dim: usize = header("input_dim")?.parse()?;
    let hidden = header("hidden")?;
    let num_labels: usize = header("num_labels")?.parse()?;
    let activation = match header("activation")?.as_str() {
        "tanh" => Activation::Tanh,
        other => bail!("unknown activation `{other}`"),
    };
    let count: usize = header("params")?.parse()?;
    let hidden = if hidden == "none" {
        Vec::new()
    } else {
        hidden.split('x').map(str::parse).collect::<Result<_, _>>()?
    };
    let params = lines.map(|l| l.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?;
    if params.len() != count {
        bail!("checkpoint declares {count} parameters but holds {}", params.len());
    }
    Ok(Model::from_params(Architecture::mlp(input_dim, hidden, num_labels), activation, params)?)
}

pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

pub const SPLIT_FILES: [&str; 3] = ["train.csv", "val.csv", "test.csv"];

pub fn load_split(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').map(str::trim).collect();
    load_csv(path, &CsvSchema::from_header(&header)).with_context(|| format!("loading {}", path.display()))
}

pub fn load_splits(dir: &Path) -> Result<Splits> {
    let [train, val, test] = SPLIT_FILES.map(|f| dir.join(f));
    Ok(Splits {
        train: load_split(&train)?.with_name("train"),
        val: load_split(&val)?.with_name("val"),
        test: load_split(&test)?.with_name("test"),
    })
}

/// Output directory written in a sibling staging directory and moved into
/// place only when the command succeeds.
pub struct Staging {
    target: PathBuf,
    staging: PathBuf,
    done: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        if target.exists() && fs::read_dir(target)?.next().is_some() {
            bail!("output directory {} already exists and is not empty", target.display());
        }
        let name = target
            .file_name()
            .with_context(|| format!("invalid output path {}", target.display()))?
            .to_string_lossy();
        let staging = target.with_file_name(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging).with_context(|| format!("creating {}", staging.display()))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            done: false,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.staging.join(file)
    }

    pub fn write(&self, file: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(file);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    pub fn commit(mut self) -> Result<()> {
        if self.target.exists() {
            fs::remove_dir(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)
            .with_context(|| format!("moving results into {}", self.target.display()))?;
        self.done = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Minimal CSV writer for report tables; no field here needs quoting.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use grouprobust::datagen::{generate_synthetic, reference_spec, strip_group_annotations, Example};
    use grouprobust::rng::{stream, Stream};

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let arch = Architecture::mlp(3, vec![4, 2], 2);
        let m = Model::init(arch, &mut stream(1, Stream::PrimaryInit)).unwrap();
        let back = parse_checkpoint(&checkpoint_text(&m)).unwrap();
        assert_eq!(back, m);
        assert!(parse_checkpoint("input_dim 1\n").is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let s = generate_synthetic(&reference_spec(), 3).unwrap();
        let again = generate_synthetic(&reference_spec(), 3).unwrap();
        assert_eq!(fingerprint(&s.train), fingerprint(&again.train));
        assert_ne!(fingerprint(&s.train), fingerprint(&strip_group_annotations(&s.train)));
        let mut ex = s.val.examples().to_vec();
        let e = &mut ex[0];
        let flipped = Example::with_attribute(e.features.clone(), 1 - e.label, e.group.unwrap().attribute);
        *e = flipped;
        let changed = Dataset::new("val", ex).unwrap();
        assert_ne!(fingerprint(&changed), fingerprint(&s.val));
        assert!(fingerprint(&s.val).starts_with("sha256:"));
    }

    #[test]
    fn staging_cleans_up_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        {
            let st = Staging::new(&target).unwrap();
            st.write("a.txt", "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        let st = Staging::new(&target).unwrap();
        st.write("a.txt", "x").unwrap();
        st.commit().unwrap();
        assert!(target.join("a.txt").exists());
        assert!(Staging::new(&target).is_err());
    }
}
