//! CSV artifacts with a provenance header, and the per-command manifest.

use std::fs;
use std::path::{Path, PathBuf};

use perpliq::{ModelParams, PayoffSpec, SimConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const OUT_DIR_ENV: &str = "PERPLIQ_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

/// `--out-dir`, then the config file, then `PERPLIQ_OUT_DIR`, then `out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON of the parameters and payoff.
pub fn params_hash(params: &ModelParams, payoff: &PayoffSpec) -> String {
    #[derive(Serialize)]
    struct Canon<'a> {
        params: perpliq::ParamsRecord,
        payoff: &'a PayoffSpec,
    }
    let json = serde_json::to_vec(&Canon {
        params: params.record(),
        payoff,
    })
    .expect("parameters serialise");
    sha256_hex(&json)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub params_sha256: String,
    pub params: perpliq::ParamsRecord,
    pub payoff: PayoffSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
}

impl Provenance {
    pub fn new(command: impl Into<String>, params: &ModelParams, payoff: &PayoffSpec) -> Self {
        Self {
            command: command.into(),
            params_sha256: params_hash(params, payoff),
            params: params.record(),
            payoff: payoff.clone(),
            seed: None,
            n_steps: None,
            n_paths: None,
        }
    }

    pub fn with_sim(mut self, sim: &SimConfig) -> Self {
        self.seed = Some(sim.seed);
        self.n_steps = Some(sim.n_steps);
        self.n_paths = Some(sim.n_paths);
        self
    }

    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = Some(n_steps);
        self
    }

    fn header(&self) -> String {
        let mut h = format!(
            "# perpliq {}\n# command: {}\n# params_sha256: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.params_sha256
        );
        if let Some(s) = self.seed {
            h.push_str(&format!("# seed: {s}\n"));
        }
        if let Some(n) = self.n_steps {
            h.push_str(&format!("# n_steps: {n}\n"));
        }
        if let Some(n) = self.n_paths {
            h.push_str(&format!("# n_paths: {n}\n"));
        }
        h
    }
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    file: String,
    description: String,
    sha256: String,
    rows: usize,
    provenance: Provenance,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    files: &'a [ManifestEntry],
}

/// Output directory of one command run.
pub struct Artifacts {
    dir: PathBuf,
    command: String,
    entries: Vec<ManifestEntry>,
}

impl Artifacts {
    pub fn create(root: &Path, command: &str) -> CliResult<Self> {
        let dir = root.join(command);
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: command.to_string(),
            entries: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write `rows` under `header` with the provenance block on top.
    pub fn csv<R, I>(&mut self, name: &str, description: &str, prov: &Provenance, header: &[&str], rows: I) -> CliResult<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(prov.header().into_bytes());
        w.write_record(header)?;
        let mut count = 0;
        for r in rows {
            w.write_record(r)?;
            count += 1;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::CliError::Config(e.to_string()))?;
        let path = self.dir.join(name);
        fs::write(&path, &bytes)?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            description: description.to_string(),
            sha256: sha256_hex(&bytes),
            rows: count,
            provenance: prov.clone(),
        });
        Ok(path)
    }

    /// Write an arbitrary JSON document next to the CSV files.
    pub fn json<T: Serialize>(&mut self, name: &str, description: &str, prov: &Provenance, value: &T) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        let path = self.dir.join(name);
        fs::write(&path, &bytes)?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            description: description.to_string(),
            sha256: sha256_hex(&bytes),
            rows: 0,
            provenance: prov.clone(),
        });
        Ok(path)
    }

    pub fn finish(self) -> CliResult<PathBuf> {
        let manifest = Manifest {
            tool: "perpliq",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            files: &self.entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_params_and_payoff() {
        let p = ModelParams::default();
        let a = params_hash(&p, &PayoffSpec::Identity);
        assert_eq!(a.len(), 64);
        assert_eq!(a, params_hash(&p, &PayoffSpec::Identity));
        assert_ne!(a, params_hash(&p, &PayoffSpec::logistic_example()));
        assert_ne!(a, params_hash(&p.with_beta(1.0).unwrap(), &PayoffSpec::Identity));
    }

    #[test]
    fn csv_starts_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let mut art = Artifacts::create(dir.path(), "demo").unwrap();
        let prov = Provenance::new("demo", &ModelParams::default(), &PayoffSpec::Identity).with_steps(5);
        let path = art
            .csv("x.csv", "demo rows", &prov, &["a", "b"], vec![vec![num(1.0), num(0.5)]])
            .unwrap();
        art.finish().unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# perpliq "));
        assert!(lines[2].starts_with("# params_sha256: "));
        assert_eq!(lines[3], "# n_steps: 5");
        assert_eq!(&lines[4..], &["a,b", "1,0.5"]);
        let manifest = fs::read_to_string(dir.path().join("demo/manifest.json")).unwrap();
        assert!(manifest.contains("\"x.csv\""));
    }

    #[test]
    fn out_dir_precedence() {
        let flag = PathBuf::from("a");
        let cfg = PathBuf::from("b");
        assert_eq!(resolve_out_dir(Some(&flag), Some(&cfg)), flag);
        assert_eq!(resolve_out_dir(None, Some(&cfg)), cfg);
    }
}
