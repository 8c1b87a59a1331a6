//! File formats: the framework input document, trajectory CSV/JSON and the
//! reduced-trajectory CSV. All writers go through [`write_atomic`].
//!
//! Input document:
//!
//! ```json
//! {"dimension": 2,
//!  "vertices": [{"id": "1", "mass": 1.0}, ...],
//!  "edges": [{"ends": ["1", "2"], "length": 1.0}, ...],
//!  "positions": {"1": [0.0, 0.0], ...}}
//! ```
//!
//! `dimension` defaults to 2 and `positions` is optional; unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::framework::{validate, Configuration, EdgeSpec, FrameworkSpec, PhasePoint, RodFramework, VertexSpec};
use crate::reduced_model::{reduced_hamiltonian, ReducedState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    #[serde(default = "two")]
    pub dimension: usize,
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<BTreeMap<String, Vec<f64>>>,
}

fn two() -> usize {
    2
}

impl InputDocument {
    pub fn from_parts(framework: &RodFramework, config: Option<&Configuration>) -> Self {
        let spec = framework.to_spec();
        let d = framework.dimension();
        let positions = config.map(|c| {
            framework
                .vertices()
                .iter()
                .enumerate()
                .map(|(i, v)| (v.id.clone(), c.coords().as_slice()[i * d..(i + 1) * d].to_vec()))
                .collect()
        });
        Self {
            dimension: spec.dimension,
            vertices: spec.vertices,
            edges: spec.edges,
            positions,
        }
    }
}

/// A validated framework and, when present, its configuration.
#[derive(Debug, Clone)]
pub struct Input {
    pub framework: RodFramework,
    pub configuration: Option<Configuration>,
}

impl Input {
    pub fn require_configuration(&self) -> Result<&Configuration> {
        self.configuration
            .as_ref()
            .ok_or_else(|| Error::Parse("input has no `positions` block".into()))
    }
}

pub fn parse_input(text: &str) -> Result<Input> {
    let doc: InputDocument = serde_json::from_str(text)?;
    let framework = validate(&FrameworkSpec {
        dimension: doc.dimension,
        vertices: doc.vertices,
        edges: doc.edges,
    })?;
    let configuration = match doc.positions {
        None => None,
        Some(map) => {
            let d = framework.dimension();
            let mut coords = DVector::zeros(framework.coordinate_count());
            for (i, v) in framework.vertices().iter().enumerate() {
                let p = map.get(&v.id).ok_or_else(|| Error::MissingPosition(v.id.clone()))?;
                if p.len() != d {
                    return Err(Error::SizeMismatch {
                        what: "position",
                        expected: d,
                        found: p.len(),
                    });
                }
                coords.as_mut_slice()[i * d..(i + 1) * d].copy_from_slice(p);
            }
            if let Some(extra) = map.keys().find(|k| framework.vertex_index(k).is_none()) {
                return Err(Error::UnknownVertex(extra.clone()));
            }
            Some(Configuration::new(&framework, coords)?)
        }
    };
    Ok(Input {
        framework,
        configuration,
    })
}

pub fn load_input(path: &Path) -> Result<Input> {
    let text = fs::read_to_string(path)?;
    parse_input(&text)
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed write never leaves a partial file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Fixed 17-significant-digit formatting used by every text writer.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv_header(framework: &RodFramework) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "p"] {
        for v in framework.vertices() {
            h.push(format!("{prefix}_{}_x", v.id));
            h.push(format!("{prefix}_{}_y", v.id));
        }
    }
    for k in 0..framework.edge_count() {
        h.push(format!("tension_{}", framework.edge_id(k)));
    }
    h.extend(["energy", "c1_max", "c2_max", "c3_max"].map(String::from));
    h
}

pub fn write_trajectory_csv(framework: &RodFramework, trajectory: &Trajectory, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_csv_header(framework))?;
    for ((t, s), obs) in trajectory.times.iter().zip(&trajectory.states).zip(&trajectory.samples) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(s.positions().iter().map(|x| fmt_f64(*x)));
        row.extend(s.momenta().iter().map(|x| fmt_f64(*x)));
        row.extend(s.tensions().iter().map(|x| fmt_f64(*x)));
        row.extend([obs.energy, obs.c1_max, obs.c2_max, obs.c3_max].map(fmt_f64));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<String>,
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub q: Vec<[f64; 2]>,
    pub p: Vec<[f64; 2]>,
    pub tension: Vec<f64>,
    pub force: Vec<[f64; 2]>,
    pub energy: f64,
    pub c1_max: f64,
    pub c2_max: f64,
    pub c3_max: f64,
}

fn pairs(v: &DVector<f64>) -> Vec<[f64; 2]> {
    v.as_slice().chunks(2).map(|c| [c[0], c[1]]).collect()
}

pub fn trajectory_document(framework: &RodFramework, trajectory: &Trajectory) -> TrajectoryDocument {
    TrajectoryDocument {
        vertices: framework.vertices().iter().map(|v| v.id.clone()).collect(),
        edges: (0..framework.edge_count()).map(|k| framework.edge_id(k)).collect(),
        samples: trajectory
            .times
            .iter()
            .zip(&trajectory.states)
            .zip(&trajectory.samples)
            .map(|((t, s), obs)| SampleRecord {
                t: *t,
                q: pairs(s.positions()),
                p: pairs(s.momenta()),
                tension: s.tensions().iter().copied().collect(),
                force: pairs(&obs.forces),
                energy: obs.energy,
                c1_max: obs.c1_max,
                c2_max: obs.c2_max,
                c3_max: obs.c3_max,
            })
            .collect(),
    }
}

pub fn write_trajectory_json(framework: &RodFramework, trajectory: &Trajectory, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &trajectory_document(framework, trajectory))?;
    writeln!(out)?;
    Ok(())
}

/// Reads a trajectory written by either writer back into timed states.
/// JSON is recognised by a leading `{`.
pub fn read_trajectory(framework: &RodFramework, text: &str) -> Result<Vec<(f64, PhasePoint)>> {
    if text.trim_start().starts_with('{') {
        read_trajectory_json(framework, text)
    } else {
        read_trajectory_csv(framework, text)
    }
}

fn read_trajectory_json(framework: &RodFramework, text: &str) -> Result<Vec<(f64, PhasePoint)>> {
    let doc: TrajectoryDocument = serde_json::from_str(text)?;
    let ids: Vec<String> = framework.vertices().iter().map(|v| v.id.clone()).collect();
    if doc.vertices != ids {
        return Err(Error::Parse("trajectory vertices do not match the framework".into()));
    }
    doc.samples
        .into_iter()
        .map(|s| {
            let flat = |v: &[[f64; 2]]| DVector::from_iterator(v.len() * 2, v.iter().flatten().copied());
            let point = PhasePoint::on_primary(framework, flat(&s.q), flat(&s.p), DVector::from_vec(s.tension))?;
            Ok((s.t, point))
        })
        .collect()
}

fn read_trajectory_csv(framework: &RodFramework, text: &str) -> Result<Vec<(f64, PhasePoint)>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("trajectory is missing column `{name}`")))
    };
    let t_col = column("t")?;
    let mut q_cols = Vec::new();
    let mut p_cols = Vec::new();
    for v in framework.vertices() {
        for axis in ["x", "y"] {
            q_cols.push(column(&format!("q_{}_{axis}", v.id))?);
            p_cols.push(column(&format!("p_{}_{axis}", v.id))?);
        }
    }
    let tension_cols: Vec<usize> = (0..framework.edge_count())
        .map(|k| column(&format!("tension_{}", framework.edge_id(k))))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| -> Result<f64> {
            record
                .get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad number in data row {}, column {}", line + 1, c + 1)))
        };
        let gather = |cols: &[usize]| -> Result<DVector<f64>> {
            Ok(DVector::from_vec(cols.iter().map(|c| field(*c)).collect::<Result<Vec<_>>>()?))
        };
        let point = PhasePoint::on_primary(framework, gather(&q_cols)?, gather(&p_cols)?, gather(&tension_cols)?)?;
        out.push((field(t_col)?, point));
    }
    Ok(out)
}

pub const REDUCED_CSV_HEADER: [&str; 8] = ["t", "x", "y", "theta", "p_x", "p_y", "p_theta", "H_R"];

pub fn write_reduced_csv(rows: &[(f64, ReducedState)], m: f64, ell: f64, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REDUCED_CSV_HEADER)?;
    for (t, s) in rows {
        w.write_record(
            [*t, s.x, s.y, s.theta, s.p_x, s.p_y, s.p_theta, reduced_hamiltonian(s, m, ell)].map(fmt_f64),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, prepare_initial_data, PolicyShape};
    use crate::framework::reference_framework;

    const TRIANGLE: &str = r#"{"dimension":2,
        "vertices":[{"id":"a","mass":1.0},{"id":"b","mass":2.0},{"id":"c","mass":1.0}],
        "edges":[{"ends":["a","b"],"length":1.0},{"ends":["b","c"],"length":1.0},{"ends":["c","a"],"length":1.0}],
        "positions":{"a":[0,0],"b":[1,0],"c":[0.5,0.8660254037844386]}}"#;

    #[test]
    fn parses_documented_schema() {
        let input = parse_input(TRIANGLE).unwrap();
        assert_eq!(input.framework.edge_count(), 3);
        assert_eq!(input.framework.mass(1), 2.0);
        assert_eq!(input.require_configuration().unwrap().coords()[2], 1.0);
        let minimal = r#"{"vertices":[{"id":"1","mass":1.0},{"id":"2","mass":1.0}],"edges":[{"ends":["1","2"],"length":1.0}]}"#;
        let input = parse_input(minimal).unwrap();
        assert!(input.configuration.is_none());
        assert!(input.require_configuration().is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_json() {
        let extra = TRIANGLE.replacen("\"dimension\":2,", "\"dimension\":2,\"colour\":\"red\",", 1);
        assert!(matches!(parse_input(&extra), Err(Error::Json(_))));
        let err = parse_input("{\"vertices\": [\n  {\"id\": 1}\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        let missing = TRIANGLE.replace(",\"c\":[0.5,0.8660254037844386]", "");
        assert!(matches!(parse_input(&missing), Err(Error::MissingPosition(_))));
    }

    #[test]
    fn csv_header_layout() {
        let (fw, _) = reference_framework(1.0, 1.0).unwrap();
        let h = trajectory_csv_header(&fw);
        assert_eq!(h.len(), 1 + 8 + 8 + 6 + 4);
        assert_eq!(h[..3], ["t", "q_1_x", "q_1_y"]);
        assert_eq!(h[9], "p_1_x");
        assert_eq!(h[17], "tension_1-2");
        assert_eq!(h[h.len() - 1], "c3_max");
    }

    #[test]
    fn trajectory_files_read_back() {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let p = prepare_initial_data(&fw, &cfg, 1.0, 0.2).unwrap();
        let traj = integrate(&fw, &p, &PolicyShape::ZERO, 0.05, 0.01).unwrap();
        let mut csv_bytes = Vec::new();
        write_trajectory_csv(&fw, &traj, &mut csv_bytes).unwrap();
        let mut json_bytes = Vec::new();
        write_trajectory_json(&fw, &traj, &mut json_bytes).unwrap();
        for bytes in [csv_bytes, json_bytes] {
            let rows = read_trajectory(&fw, std::str::from_utf8(&bytes).unwrap()).unwrap();
            assert_eq!(rows.len(), traj.len());
            for ((t, s), (t0, s0)) in rows.iter().zip(traj.times.iter().zip(&traj.states)) {
                assert_eq!(t, t0);
                assert_eq!(s, s0);
            }
        }
    }

    #[test]
    fn atomic_write_leaves_nothing_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let err = write_atomic(&path, |w| {
            w.write_all(b"partial")?;
            Err(Error::Parse("boom".into()))
        });
        assert!(err.is_err());
        assert!(!path.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
        write_atomic(&path, |w| Ok(w.write_all(b"ok")?)).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "ok");
    }
}
