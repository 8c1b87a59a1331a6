//! Rod-and-mass frameworks: the graph, configurations, phase-space points and
//! the rigidity matrix.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unchecked description of a framework, as read from input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameworkSpec {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
}

fn default_dimension() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub id: String,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub ends: [String; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub mass: f64,
}

/// A rod between two vertices. `ends[0] < ends[1]` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub ends: [usize; 2],
    pub rest_length: f64,
}

/// A validated framework. Vertices keep their input order; edges are sorted
/// lexicographically by their (sorted) endpoint indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RodFramework {
    dimension: usize,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    // (neighbour vertex, edge index) per vertex
    incidence: Vec<Vec<(usize, usize)>>,
}

/// Checks every framework invariant and returns the validated framework, or
/// the first violation found.
pub fn validate(spec: &FrameworkSpec) -> Result<RodFramework> {
    if spec.dimension != 2 {
        return Err(Error::UnsupportedDimension(spec.dimension));
    }
    if spec.vertices.is_empty() {
        return Err(Error::Empty);
    }
    let mut index = HashMap::new();
    for (i, v) in spec.vertices.iter().enumerate() {
        if index.insert(v.id.as_str(), i).is_some() {
            return Err(Error::DuplicateVertex(v.id.clone()));
        }
        if !(v.mass > 0.0 && v.mass.is_finite()) {
            return Err(Error::NonPositiveMass {
                vertex: v.id.clone(),
                mass: v.mass,
            });
        }
    }

    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(spec.edges.len());
    for e in &spec.edges {
        let lookup = |id: &String| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownVertex(id.clone()))
        };
        let a = lookup(&e.ends[0])?;
        let b = lookup(&e.ends[1])?;
        if a == b {
            return Err(Error::SelfLoop(e.ends[0].clone()));
        }
        let ends = if a < b { [a, b] } else { [b, a] };
        let label = format!("{{{},{}}}", e.ends[0], e.ends[1]);
        if !seen.insert(ends) {
            return Err(Error::DuplicateEdge(label));
        }
        if !(e.length > 0.0 && e.length.is_finite()) {
            return Err(Error::NonPositiveLength {
                edge: label,
                length: e.length,
            });
        }
        edges.push(Edge {
            ends,
            rest_length: e.length,
        });
    }
    edges.sort_by_key(|e| e.ends);

    let n = spec.vertices.len();
    let mut incidence = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        incidence[e.ends[0]].push((e.ends[1], k));
        incidence[e.ends[1]].push((e.ends[0], k));
    }

    let mut reached = vec![false; n];
    let mut queue = VecDeque::from([0]);
    reached[0] = true;
    while let Some(i) = queue.pop_front() {
        for &(j, _) in &incidence[i] {
            if !reached[j] {
                reached[j] = true;
                queue.push_back(j);
            }
        }
    }
    if let Some(i) = reached.iter().position(|r| !r) {
        return Err(Error::Disconnected(spec.vertices[i].id.clone()));
    }

    Ok(RodFramework {
        dimension: spec.dimension,
        vertices: spec
            .vertices
            .iter()
            .map(|v| Vertex {
                id: v.id.clone(),
                mass: v.mass,
            })
            .collect(),
        edges,
        incidence,
    })
}

impl TryFrom<&FrameworkSpec> for RodFramework {
    type Error = Error;

    fn try_from(spec: &FrameworkSpec) -> Result<Self> {
        validate(spec)
    }
}

impl RodFramework {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of position (or momentum) coordinates.
    pub fn coordinate_count(&self) -> usize {
        self.vertices.len() * self.dimension
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn mass(&self, vertex: usize) -> f64 {
        self.vertices[vertex].mass
    }

    /// Neighbours of a vertex with the index of the connecting edge.
    pub fn incident(&self, vertex: usize) -> &[(usize, usize)] {
        &self.incidence[vertex]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Human-readable edge label such as `{1,2}`.
    pub fn edge_label(&self, edge: usize) -> String {
        let [a, b] = self.edges[edge].ends;
        format!("{{{},{}}}", self.vertices[a].id, self.vertices[b].id)
    }

    /// Column-name-safe edge id such as `1-2`.
    pub fn edge_id(&self, edge: usize) -> String {
        let [a, b] = self.edges[edge].ends;
        format!("{}-{}", self.vertices[a].id, self.vertices[b].id)
    }

    /// Finds an edge from a label written as `1-2`, `1,2` or `{1,2}`.
    pub fn edge_index(&self, label: &str) -> Result<usize> {
        let unknown = || Error::UnknownEdge(label.to_string());
        let trimmed = label.trim().trim_start_matches('{').trim_end_matches('}');
        let (a, b) = trimmed
            .split_once(',')
            .or_else(|| trimmed.split_once('-'))
            .ok_or_else(unknown)?;
        let a = self.vertex_index(a.trim()).ok_or_else(unknown)?;
        let b = self.vertex_index(b.trim()).ok_or_else(unknown)?;
        let ends = if a < b { [a, b] } else { [b, a] };
        self.edges
            .iter()
            .position(|e| e.ends == ends)
            .ok_or_else(unknown)
    }

    pub fn total_mass(&self) -> f64 {
        self.vertices.iter().map(|v| v.mass).sum()
    }

    /// Per-coordinate inverse masses.
    pub fn inverse_mass_diagonal(&self) -> DVector<f64> {
        let d = self.dimension;
        DVector::from_fn(self.coordinate_count(), |k, _| 1.0 / self.vertices[k / d].mass)
    }

    /// Back to an input description (with edges in canonical order).
    pub fn to_spec(&self) -> FrameworkSpec {
        FrameworkSpec {
            dimension: self.dimension,
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexSpec {
                    id: v.id.clone(),
                    mass: v.mass,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    ends: [
                        self.vertices[e.ends[0]].id.clone(),
                        self.vertices[e.ends[1]].id.clone(),
                    ],
                    length: e.rest_length,
                })
                .collect(),
        }
    }

    /// The same framework with one rod removed.
    pub fn without_edge(&self, label: &str) -> Result<RodFramework> {
        let k = self.edge_index(label)?;
        let mut spec = self.to_spec();
        spec.edges.remove(k);
        validate(&spec)
    }

    pub(crate) fn check_coordinates(&self, what: &'static str, v: &DVector<f64>) -> Result<()> {
        check_len(what, self.coordinate_count(), v.len())
    }

    pub(crate) fn check_edge_vector(&self, what: &'static str, v: &DVector<f64>) -> Result<()> {
        check_len(what, self.edge_count(), v.len())
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::SizeMismatch {
            what,
            expected,
            found,
        })
    }
}

impl fmt::Display for RodFramework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vertices, {} rods in {}D",
            self.vertex_count(),
            self.edge_count(),
            self.dimension
        )
    }
}

/// Positions of every vertex, stored vertex-major (`x0, y0, x1, y1, ...`).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    coords: DVector<f64>,
}

impl Configuration {
    pub fn new(framework: &RodFramework, coords: DVector<f64>) -> Result<Self> {
        framework.check_coordinates("configuration", &coords)?;
        Ok(Self { coords })
    }

    pub fn from_points(framework: &RodFramework, points: &[[f64; 2]]) -> Result<Self> {
        check_len("configuration", framework.vertex_count(), points.len())?;
        let coords = DVector::from_iterator(
            points.len() * 2,
            points.iter().flat_map(|p| p.iter().copied()),
        );
        Self::new(framework, coords)
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }
}

/// A point of the full phase space: positions, rod tensions (the multipliers),
/// particle momenta and multiplier momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    positions: DVector<f64>,
    tensions: DVector<f64>,
    momenta: DVector<f64>,
    multiplier_momenta: DVector<f64>,
}

impl PhasePoint {
    /// A point on the primary constraint surface (all multiplier momenta zero).
    pub fn on_primary(
        framework: &RodFramework,
        positions: DVector<f64>,
        momenta: DVector<f64>,
        tensions: DVector<f64>,
    ) -> Result<Self> {
        let e = framework.edge_count();
        Self::new(framework, positions, momenta, tensions, DVector::zeros(e))
    }

    pub fn new(
        framework: &RodFramework,
        positions: DVector<f64>,
        momenta: DVector<f64>,
        tensions: DVector<f64>,
        multiplier_momenta: DVector<f64>,
    ) -> Result<Self> {
        framework.check_coordinates("positions", &positions)?;
        framework.check_coordinates("momenta", &momenta)?;
        framework.check_edge_vector("tensions", &tensions)?;
        framework.check_edge_vector("multiplier momenta", &multiplier_momenta)?;
        Ok(Self {
            positions,
            tensions,
            momenta,
            multiplier_momenta,
        })
    }

    /// Static point: zero momenta and tensions.
    pub fn at_rest(framework: &RodFramework, config: &Configuration) -> Result<Self> {
        Self::on_primary(
            framework,
            config.coords().clone(),
            DVector::zeros(framework.coordinate_count()),
            DVector::zeros(framework.edge_count()),
        )
    }

    pub fn positions(&self) -> &DVector<f64> {
        &self.positions
    }

    pub fn momenta(&self) -> &DVector<f64> {
        &self.momenta
    }

    pub fn tensions(&self) -> &DVector<f64> {
        &self.tensions
    }

    pub fn multiplier_momenta(&self) -> &DVector<f64> {
        &self.multiplier_momenta
    }

    pub fn with_positions(mut self, positions: DVector<f64>) -> Result<Self> {
        check_len("positions", self.positions.len(), positions.len())?;
        self.positions = positions;
        Ok(self)
    }

    pub fn with_momenta(mut self, momenta: DVector<f64>) -> Result<Self> {
        check_len("momenta", self.momenta.len(), momenta.len())?;
        self.momenta = momenta;
        Ok(self)
    }

    pub fn with_tensions(mut self, tensions: DVector<f64>) -> Result<Self> {
        check_len("tensions", self.tensions.len(), tensions.len())?;
        self.tensions = tensions;
        Ok(self)
    }

    pub(crate) fn from_parts_unchecked(
        positions: DVector<f64>,
        momenta: DVector<f64>,
        tensions: DVector<f64>,
    ) -> Self {
        let e = tensions.len();
        Self {
            positions,
            tensions,
            momenta,
            multiplier_momenta: DVector::zeros(e),
        }
    }
}

/// `q_i - q_j` for a flattened coordinate vector.
pub(crate) fn separation(v: &DVector<f64>, d: usize, i: usize, j: usize) -> [f64; 2] {
    debug_assert_eq!(d, 2);
    [v[i * d] - v[j * d], v[i * d + 1] - v[j * d + 1]]
}

pub(crate) fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Counter-clockwise rotation by a quarter turn.
pub fn rotate_quarter(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// The four-mass, six-rod reference system: three outer masses on an
/// equilateral triangle of side `ell*sqrt(3)` and a fourth at its barycentre,
/// every outer mass tied to the centre and to each other.
pub fn reference_framework(ell: f64, m: f64) -> Result<(RodFramework, Configuration)> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidParameter(format!("rod length must be positive, got {ell}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {m}")));
    }
    let outer = ell * 3f64.sqrt();
    let spec = FrameworkSpec {
        dimension: 2,
        vertices: (1..=4)
            .map(|i| VertexSpec {
                id: i.to_string(),
                mass: m,
            })
            .collect(),
        edges: [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
            .into_iter()
            .map(|(a, b)| EdgeSpec {
                ends: [a.to_string(), b.to_string()],
                length: if a == 1 { ell } else { outer },
            })
            .collect(),
    };
    let framework = validate(&spec)?;
    let h = ell * 3f64.sqrt() / 2.0;
    let config = Configuration::from_points(
        &framework,
        &[[0.0, 0.0], [0.0, ell], [h, -ell / 2.0], [-h, -ell / 2.0]],
    )?;
    Ok((framework, config))
}

/// Gradient of every squared edge length with respect to all positions; one
/// row per edge. `R * velocities = 0` is the velocity-level rod condition.
pub fn rigidity_matrix(framework: &RodFramework, positions: &DVector<f64>) -> DMatrix<f64> {
    let d = framework.dimension();
    let mut r = DMatrix::zeros(framework.edge_count(), framework.coordinate_count());
    for (k, e) in framework.edges().iter().enumerate() {
        let [i, j] = e.ends;
        let s = separation(positions, d, i, j);
        for c in 0..d {
            r[(k, i * d + c)] = 2.0 * s[c];
            r[(k, j * d + c)] = -2.0 * s[c];
        }
    }
    r
}

/// Squared-length residual `|q_i - q_j|^2 - l_ij^2` per edge.
pub fn length_residuals(framework: &RodFramework, positions: &DVector<f64>) -> DVector<f64> {
    let d = framework.dimension();
    DVector::from_iterator(
        framework.edge_count(),
        framework.edges().iter().map(|e| {
            let s = separation(positions, d, e.ends[0], e.ends[1]);
            dot2(s, s) - e.rest_length * e.rest_length
        }),
    )
}

/// Mass-weighted centroid.
pub fn center_of_mass(framework: &RodFramework, positions: &DVector<f64>) -> [f64; 2] {
    let d = framework.dimension();
    let mut c = [0.0; 2];
    for (i, v) in framework.vertices().iter().enumerate() {
        c[0] += v.mass * positions[i * d];
        c[1] += v.mass * positions[i * d + 1];
    }
    let total = framework.total_mass();
    [c[0] / total, c[1] / total]
}
