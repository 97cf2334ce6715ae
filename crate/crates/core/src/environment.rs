//! The quenched environment: a cyclic sequence of figures between adjacent
//! sites of the ladder `T_N x {1,-1}`, the oriented edges it induces, and the
//! partition of the vertices into tiles.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ZrpError};

/// Orientation pattern of the four edges between site `j` and site `j+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FigureType {
    F1,
    F2,
    F3,
}

impl FigureType {
    pub fn as_char(self) -> char {
        match self {
            FigureType::F1 => '1',
            FigureType::F2 => '2',
            FigureType::F3 => '3',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '1' => Some(FigureType::F1),
            '2' => Some(FigureType::F2),
            '3' => Some(FigureType::F3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Row {
    Upper,
    Lower,
}

impl Row {
    pub fn sign(self) -> i8 {
        match self {
            Row::Upper => 1,
            Row::Lower => -1,
        }
    }
}

impl From<Row> for i8 {
    fn from(r: Row) -> i8 {
        r.sign()
    }
}

impl TryFrom<i8> for Row {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Row::Upper),
            -1 => Ok(Row::Lower),
            _ => Err(format!("row must be +1 or -1, got {v}")),
        }
    }
}

/// A vertex `(site, row)` of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub site: usize,
    pub row: Row,
}

impl VertexId {
    pub fn new(site: usize, row: Row) -> Self {
        VertexId { site, row }
    }

    pub fn upper(site: usize) -> Self {
        VertexId::new(site, Row::Upper)
    }

    pub fn lower(site: usize) -> Self {
        VertexId::new(site, Row::Lower)
    }

    /// Flat index `2*site + (row == -1)`.
    #[inline]
    pub fn index(self) -> usize {
        2 * self.site + usize::from(self.row == Row::Lower)
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        let row = if i % 2 == 0 { Row::Upper } else { Row::Lower };
        VertexId::new(i / 2, row)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.site, self.row.sign())
    }
}

/// Parameters an environment was sampled with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub seed: u64,
    pub pair_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    n: usize,
    figures: Vec<FigureType>,
    generation: Option<Generation>,
}

impl Environment {
    /// Wraps a figure sequence without checking it; see [`Environment::validate`].
    pub fn from_figures(figures: Vec<FigureType>) -> Self {
        Environment {
            n: figures.len(),
            figures,
            generation: None,
        }
    }

    /// All-`F1` environment on `n` sites.
    pub fn homogeneous(n: usize) -> Self {
        Self::from_figures(vec![FigureType::F1; n])
    }

    /// `[F2, F3]` repeated `pairs` times.
    pub fn all_pairs(pairs: usize) -> Self {
        let figures = (0..pairs).flat_map(|_| [FigureType::F2, FigureType::F3]).collect();
        Self::from_figures(figures)
    }

    /// Samples an environment by walking the cycle and, at each decision
    /// point, starting an `F2 F3` pair with probability `p` or emitting `F1`.
    /// A pair drawn with a single slot left is replaced by `F1`, so the
    /// sequence never ends in the middle of a pair.
    pub fn generate(n: usize, p: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(ZrpError::InvalidSize(format!("need at least 2 sites, got {n}")));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(ZrpError::InvalidParameter(format!(
                "pair probability must lie in [0,1), got {p}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut figures = Vec::with_capacity(n);
        while figures.len() < n {
            let pair = rng.random::<f64>() < p;
            if pair && n - figures.len() >= 2 {
                figures.push(FigureType::F2);
                figures.push(FigureType::F3);
            } else {
                figures.push(FigureType::F1);
            }
        }
        Ok(Environment {
            n,
            figures,
            generation: Some(Generation { seed, pair_prob: p }),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        2 * self.n
    }

    pub fn figures(&self) -> &[FigureType] {
        &self.figures
    }

    pub fn generation(&self) -> Option<Generation> {
        self.generation
    }

    /// Figure between `site` and `site + 1`.
    #[inline]
    pub fn figure(&self, site: usize) -> FigureType {
        self.figures[site % self.n]
    }

    /// Figure between `site - 1` and `site`.
    #[inline]
    pub fn left_figure(&self, site: usize) -> FigureType {
        self.figures[(site + self.n - 1) % self.n]
    }

    /// Number of `F2 F3` pairs.
    pub fn pair_count(&self) -> usize {
        self.figures.iter().filter(|&&f| f == FigureType::F2).count()
    }

    /// Number of decision blocks (`1` or `23`) the sequence is made of.
    pub fn block_count(&self) -> usize {
        self.n - self.pair_count()
    }

    /// Cyclic shift: figure `j` of the result is figure `j + shift` of `self`.
    pub fn shifted(&self, shift: usize) -> Self {
        let figures = (0..self.n).map(|j| self.figure(j + shift)).collect();
        Environment {
            n: self.n,
            figures,
            generation: self.generation,
        }
    }

    pub fn to_line(&self) -> String {
        self.figures.iter().map(|f| f.as_char()).collect()
    }

    /// Parses the one-line file format and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let line = text.trim_end_matches(['\n', '\r']);
        if line.contains('\n') {
            return Err(ZrpError::Parse("environment must be a single line".into()));
        }
        let figures = line
            .chars()
            .enumerate()
            .map(|(i, c)| {
                FigureType::from_char(c).ok_or_else(|| ZrpError::Parse(format!("bad figure {c:?} at position {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let env = Environment::from_figures(figures);
        env.ensure_valid()?;
        Ok(env)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, format!("{}\n", self.to_line()))?;
        Ok(())
    }

    /// SHA-256 of the figure line, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_line().as_bytes()))
    }

    pub fn validate(&self) -> ValidationReport {
        validate_environment(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(ZrpError::Validation(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    TooFewSites {
        n: usize,
    },
    F2NotFollowedByF3 {
        position: usize,
    },
    F3NotPrecededByF2 {
        position: usize,
    },
    Degree {
        vertex: VertexId,
        in_degree: usize,
        out_degree: usize,
    },
    Cut {
        cut: usize,
        rightward: usize,
        leftward: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewSites { n } => write!(f, "environment has {n} sites, need at least 2"),
            Violation::F2NotFollowedByF3 { position } => {
                write!(f, "F2 not followed by F3 at position {position}")
            }
            Violation::F3NotPrecededByF2 { position } => {
                write!(f, "F3 not preceded by F2 at position {position}")
            }
            Violation::Degree {
                vertex,
                in_degree,
                out_degree,
            } => write!(
                f,
                "vertex {vertex} has in-degree {in_degree} and out-degree {out_degree}"
            ),
            Violation::Cut {
                cut,
                rightward,
                leftward,
            } => write!(
                f,
                "cut {cut} crossed by {rightward} rightward and {leftward} leftward edges"
            ),
        }
    }
}

/// Violated invariants of an environment; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains_message(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks grammar, vertex degrees and cut balance. Violations are data.
pub fn validate_environment(env: &Environment) -> ValidationReport {
    let mut violations = Vec::new();
    let n = env.n();
    if n < 2 {
        violations.push(Violation::TooFewSites { n });
        return ValidationReport { violations };
    }
    for j in 0..n {
        match env.figure(j) {
            FigureType::F2 if env.figure(j + 1) != FigureType::F3 => {
                violations.push(Violation::F2NotFollowedByF3 { position: j })
            }
            FigureType::F3 if env.left_figure(j) != FigureType::F2 => {
                violations.push(Violation::F3NotPrecededByF2 { position: j })
            }
            _ => {}
        }
    }

    let edges = raw_edges(env);
    let mut in_deg = vec![0usize; 2 * n];
    let mut out_deg = vec![0usize; 2 * n];
    let mut right = vec![0usize; n];
    let mut left = vec![0usize; n];
    for e in &edges {
        out_deg[e.source.index()] += 1;
        in_deg[e.target.index()] += 1;
        if e.rightward {
            right[e.figure] += 1;
        } else {
            left[e.figure] += 1;
        }
    }
    for v in 0..2 * n {
        if in_deg[v] != 2 || out_deg[v] != 2 {
            violations.push(Violation::Degree {
                vertex: VertexId::from_index(v),
                in_degree: in_deg[v],
                out_degree: out_deg[v],
            });
        }
    }
    for cut in 0..n {
        if right[cut] != 2 || left[cut] != 2 {
            violations.push(Violation::Cut {
                cut,
                rightward: right[cut],
                leftward: left[cut],
            });
        }
    }
    ValidationReport { violations }
}

/// One oriented edge, tagged with the figure it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: VertexId,
    pub target: VertexId,
    pub figure: usize,
    pub rightward: bool,
}

fn raw_edges(env: &Environment) -> Vec<Edge> {
    use FigureType::*;
    let n = env.n();
    let mut edges = Vec::with_capacity(4 * n);
    for j in 0..n {
        let k = (j + 1) % n;
        let (u0, l0, u1, l1) = (
            VertexId::upper(j),
            VertexId::lower(j),
            VertexId::upper(k),
            VertexId::lower(k),
        );
        let pattern: [(VertexId, VertexId); 4] = match env.figure(j) {
            F1 => [(u0, u1), (l0, l1), (u1, l0), (l1, u0)],
            F2 => [(u0, u1), (l0, u1), (l1, u0), (l1, l0)],
            F3 => [(u0, u1), (u0, l1), (u1, l0), (l1, l0)],
        };
        for (source, target) in pattern {
            edges.push(Edge {
                source,
                target,
                figure: j,
                rightward: source.site == j && target.site == k && (j != k),
            });
        }
    }
    edges
}

/// The oriented edges of a valid environment together with a flat
/// out-adjacency table (`out[v]` holds the two targets of vertex index `v`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedEdgeSet {
    edges: Vec<Edge>,
    out: Vec<[u32; 2]>,
}

impl OrientedEdgeSet {
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.out.len()
    }

    #[inline]
    pub fn out_neighbours(&self, v: usize) -> [u32; 2] {
        self.out[v]
    }

    pub fn out_adjacency(&self) -> &[[u32; 2]] {
        &self.out
    }

    /// The same graph with every edge reversed (the time-reversed dynamics).
    pub fn reversed(&self) -> Self {
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge {
                source: e.target,
                target: e.source,
                figure: e.figure,
                rightward: !e.rightward,
            })
            .collect();
        let out = out_table(&edges, self.out.len());
        OrientedEdgeSet { edges, out }
    }
}

fn out_table(edges: &[Edge], vertices: usize) -> Vec<[u32; 2]> {
    let mut out = vec![[u32::MAX; 2]; vertices];
    let mut filled = vec![0usize; vertices];
    for e in edges {
        let s = e.source.index();
        out[s][filled[s]] = e.target.index() as u32;
        filled[s] += 1;
    }
    out
}

/// Reads the oriented edges off the per-figure terms of the generator.
pub fn build_edges(env: &Environment) -> Result<OrientedEdgeSet> {
    env.ensure_valid()?;
    let edges = raw_edges(env);
    let out = out_table(&edges, env.vertex_count());
    Ok(OrientedEdgeSet { edges, out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub index: usize,
    pub centre_site: usize,
    pub vertices: Vec<VertexId>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileDecomposition {
    pub tiles: Vec<Tile>,
    /// Tile index for each site that is a centre.
    pub centre_of: Vec<Option<usize>>,
    /// Tile index for each vertex, by flat vertex index.
    pub tile_of: Vec<usize>,
    pub t_n: usize,
    pub kappa_n: f64,
}

impl TileDecomposition {
    pub fn n(&self) -> usize {
        self.centre_of.len()
    }

    /// Tile sizes `N_j` in tile order.
    pub fn sizes(&self) -> Vec<usize> {
        self.tiles.iter().map(|t| t.size).collect()
    }

    /// Centre sites `x_j` in tile order.
    pub fn centres(&self) -> Vec<usize> {
        self.tiles.iter().map(|t| t.centre_site).collect()
    }

    pub fn check_window(&self, l: usize) -> Result<()> {
        if 2 * l + 1 > self.t_n {
            return Err(ZrpError::InvalidWindow(format!(
                "window of {} tiles exceeds the {} tiles available",
                2 * l + 1,
                self.t_n
            )));
        }
        Ok(())
    }

    /// `sum_{|k-j|<=l} N_k` for every tile `j`, cyclically.
    pub fn window_vertex_counts(&self, l: usize) -> Result<Vec<usize>> {
        self.check_window(l)?;
        Ok(cyclic_window_sums(&self.sizes(), l))
    }
}

/// Cyclic sliding-window sums of width `2l+1` centred on each index.
pub(crate) fn cyclic_window_sums<T>(values: &[T], l: usize) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + Default,
{
    let t = values.len();
    let at = |i: isize| values[i.rem_euclid(t as isize) as usize];
    let mut acc = T::default();
    for k in -(l as isize)..=(l as isize) {
        acc = acc + at(k);
    }
    let mut out = Vec::with_capacity(t);
    for j in 0..t as isize {
        out.push(acc);
        acc = acc + at(j + l as isize + 1) - at(j - l as isize);
    }
    out
}

/// Partitions the vertices into tiles by looking at the figures on either
/// side of every site.
pub fn decompose_tiles(env: &Environment) -> Result<TileDecomposition> {
    use FigureType::*;
    env.ensure_valid()?;
    let n = env.n();
    let mut tiles = Vec::new();
    let mut centre_of = vec![None; n];
    for x in 0..n {
        let (left, right) = (env.left_figure(x), env.figure(x));
        let (take_left, take_right) = match (left, right) {
            (F2, F3) => continue,
            (F1, F1) => (false, false),
            (F1, F2) => (false, true),
            (F3, F1) => (true, false),
            (F3, F2) => (true, true),
            _ => unreachable!("grammar checked above"),
        };
        let mut vertices = Vec::with_capacity(4);
        if take_left {
            vertices.push(VertexId::lower((x + n - 1) % n));
        }
        vertices.push(VertexId::upper(x));
        vertices.push(VertexId::lower(x));
        if take_right {
            vertices.push(VertexId::upper((x + 1) % n));
        }
        let index = tiles.len();
        centre_of[x] = Some(index);
        tiles.push(Tile {
            index,
            centre_site: x,
            size: vertices.len(),
            vertices,
        });
    }

    let mut tile_of = vec![usize::MAX; 2 * n];
    for tile in &tiles {
        for v in &tile.vertices {
            debug_assert_eq!(tile_of[v.index()], usize::MAX, "vertex {v} in two tiles");
            tile_of[v.index()] = tile.index;
        }
    }
    debug_assert!(tile_of.iter().all(|&t| t != usize::MAX));

    let t_n = tiles.len();
    Ok(TileDecomposition {
        tiles,
        centre_of,
        tile_of,
        t_n,
        kappa_n: n as f64 / t_n as f64,
    })
}

/// For each total `m` in `[4l+2, 8l+4]`, the number of tiles whose `2l+1`
/// surrounding tiles hold `m` vertices.
pub fn shape_census(decomp: &TileDecomposition, l: usize) -> Result<BTreeMap<usize, usize>> {
    let sums = decomp.window_vertex_counts(l)?;
    let mut census: BTreeMap<usize, usize> = (4 * l + 2..=8 * l + 4).map(|m| (m, 0)).collect();
    for m in sums {
        *census.entry(m).or_default() += 1;
    }
    Ok(census)
}
