//! Quasi-uniform triangulations of the unit disk and the unit square.
//!
//! A [`Mesh`] carries its closed boundary chain explicitly, because the same
//! vertices serve as bulk degrees of freedom and as degrees of freedom of the
//! surface (boundary curve) finite element space.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Deepest refinement accepted by [`unit_disk_mesh`].
pub const MAX_REFINEMENT_LEVEL: usize = 14;

/// Upper bound on [`ValidationReport::quality_ratio`] accepted by [`validate`].
pub const QUASI_UNIFORMITY_BOUND: f64 = 10.0;

const UNIT_CIRCLE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    UnitDisk,
    UnitSquare,
    /// Any straight-sided domain; boundary midpoints stay on their edge.
    Polygon,
}

impl DomainKind {
    fn name(self) -> &'static str {
        match self {
            DomainKind::UnitDisk => "UnitDisk",
            DomainKind::UnitSquare => "UnitSquare",
            DomainKind::Polygon => "Polygon",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "UnitDisk" => Some(DomainKind::UnitDisk),
            "UnitSquare" => Some(DomainKind::UnitSquare),
            "Polygon" => Some(DomainKind::Polygon),
            _ => None,
        }
    }
}

/// A 2D triangulation with an ordered, closed boundary edge chain.
///
/// Meshes are immutable once built.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    is_boundary: Vec<bool>,
    domain: DomainKind,
    h: f64,
}

impl Mesh {
    /// Builds a mesh from raw parts without validating it.
    ///
    /// The boundary flags are derived from the boundary chain and `h` from the
    /// triangle edges. Use [`validate`] to check the result.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
        domain: DomainKind,
    ) -> Result<Self> {
        let n = vertices.len();
        let out_of_range = triangles.iter().flatten().chain(boundary_edges.iter().flatten()).find(|&&i| i >= n);
        if let Some(&i) = out_of_range {
            return Err(Error::InvalidMesh(format!("vertex index {i} out of range (vertex count {n})")));
        }
        let mut is_boundary = vec![false; n];
        for &[a, b] in &boundary_edges {
            is_boundary[a] = true;
            is_boundary[b] = true;
        }
        let h = max_edge_length(&vertices, &triangles);
        Ok(Self { vertices, triangles, boundary_edges, is_boundary, domain, h })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.is_boundary[vertex]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.is_boundary
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    /// Maximal edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_boundary_vertices(&self) -> usize {
        self.is_boundary.iter().filter(|&&b| b).count()
    }

    pub fn signed_area(&self, triangle: usize) -> f64 {
        let [a, b, c] = self.triangles[triangle];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Area of the polygonal domain.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Length of the polygonal boundary.
    pub fn perimeter(&self) -> f64 {
        self.boundary_edges.iter().map(|&[a, b]| dist(self.vertices[a], self.vertices[b])).sum()
    }

    /// Writes the mesh in a line-based debugging format.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "domain {}", self.domain.name());
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Reads the format produced by [`Mesh::write_text`].
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::InvalidMesh(format!("unexpected end of input while reading {what}")))
        };
        fn header(line: &str, key: &str) -> Result<String> {
            let mut it = line.split_whitespace();
            match (it.next(), it.next()) {
                (Some(k), Some(v)) if k == key => Ok(v.to_string()),
                _ => Err(Error::InvalidMesh(format!("expected `{key} <value>`, found `{line}`"))),
            }
        }
        fn parse_all<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>> {
            let vals: Vec<T> = line
                .split_whitespace()
                .map(|s| s.parse::<T>().map_err(|_| Error::InvalidMesh(format!("cannot parse `{s}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != n {
                return Err(Error::InvalidMesh(format!("expected {n} values in `{line}`")));
            }
            Ok(vals)
        }
        let count = |s: String| s.parse::<usize>().map_err(|_| Error::InvalidMesh(format!("bad count `{s}`")));

        let domain_name = header(&next("domain")?, "domain")?;
        let domain = DomainKind::parse(&domain_name)
            .ok_or_else(|| Error::InvalidMesh(format!("unknown domain `{domain_name}`")))?;
        let nv = count(header(&next("vertices")?, "vertices")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let v: Vec<f64> = parse_all(&next("vertex")?, 2)?;
            vertices.push([v[0], v[1]]);
        }
        let nt = count(header(&next("triangles")?, "triangles")?)?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let t: Vec<usize> = parse_all(&next("triangle")?, 3)?;
            triangles.push([t[0], t[1], t[2]]);
        }
        let nb = count(header(&next("boundary")?, "boundary")?)?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let e: Vec<usize> = parse_all(&next("boundary edge")?, 2)?;
            boundary.push([e[0], e[1]]);
        }
        Mesh::from_parts(vertices, triangles, boundary, domain)
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

fn max_edge_length(vertices: &[Point], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| dist(vertices[a], vertices[b]))
        .fold(0.0, f64::max)
}

/// Maximum edge length over all triangle edges.
pub fn mesh_width(mesh: &Mesh) -> f64 {
    max_edge_length(&mesh.vertices, &mesh.triangles)
}

/// Coarse disk mesh: center, a ring of 6 vertices at radius 1/2 and 12 vertices
/// on the unit circle (19 vertices, 24 triangles), refined `refinement_level` times.
pub fn unit_disk_mesh(refinement_level: usize) -> Result<Mesh> {
    if refinement_level > MAX_REFINEMENT_LEVEL {
        return Err(Error::Capacity { level: refinement_level, max: MAX_REFINEMENT_LEVEL });
    }
    let polar = |r: f64, deg: f64| {
        let a = deg.to_radians();
        [r * a.cos(), r * a.sin()]
    };
    let mut vertices = vec![[0.0, 0.0]];
    vertices.extend((0..6).map(|i| polar(0.5, 60.0 * i as f64)));
    // exact unit length on the circle
    vertices.extend((0..12).map(|j| {
        let p = polar(1.0, 30.0 * j as f64);
        let r = p[0].hypot(p[1]);
        [p[0] / r, p[1] / r]
    }));
    let inner = |i: usize| 1 + i % 6;
    let outer = |j: usize| 7 + j % 12;
    let mut triangles = Vec::with_capacity(24);
    for i in 0..6 {
        triangles.push([0, inner(i), inner(i + 1)]);
        triangles.push([inner(i), outer(2 * i), outer(2 * i + 1)]);
        triangles.push([inner(i), outer(2 * i + 1), inner(i + 1)]);
        triangles.push([inner(i + 1), outer(2 * i + 1), outer(2 * i + 2)]);
    }
    let boundary = (0..12).map(|j| [outer(j), outer(j + 1)]).collect();
    let mut mesh = Mesh::from_parts(vertices, triangles, boundary, DomainKind::UnitDisk)?;
    for _ in 0..refinement_level {
        mesh = refine(&mesh)?;
    }
    Ok(mesh)
}

/// Structured triangulation of (0,1)² with `n` cells per side, each cell split
/// along its rising diagonal.
pub fn unit_square_mesh(n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("unit square mesh needs n >= 2, got {n}")));
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let step = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // exact 1.0 on the far sides
            let x = if i == n { 1.0 } else { i as f64 * step };
            let y = if j == n { 1.0 } else { j as f64 * step };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let mut boundary = Vec::with_capacity(4 * n);
    boundary.extend((0..n).map(|i| [idx(i, 0), idx(i + 1, 0)]));
    boundary.extend((0..n).map(|j| [idx(n, j), idx(n, j + 1)]));
    boundary.extend((0..n).rev().map(|i| [idx(i + 1, n), idx(i, n)]));
    boundary.extend((0..n).rev().map(|j| [idx(0, j + 1), idx(0, j)]));
    Mesh::from_parts(vertices, triangles, boundary, DomainKind::UnitSquare)
}

/// Uniform red refinement; see [`refine_with_parents`].
pub fn refine(mesh: &Mesh) -> Result<Mesh> {
    refine_with_parents(mesh).map(|(m, _)| m)
}

/// Uniform red refinement, returning for every fine vertex the pair of coarse
/// vertices it was created from (`[i, i]` for inherited vertices).
///
/// Midpoints of boundary edges of disk meshes are projected radially onto the
/// unit circle.
pub fn refine_with_parents(mesh: &Mesh) -> Result<(Mesh, Vec<[usize; 2]>)> {
    let mut vertices = mesh.vertices.clone();
    let mut parents: Vec<[usize; 2]> = (0..vertices.len()).map(|i| [i, i]).collect();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();

    let mut boundary = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for &[a, b] in &mesh.boundary_edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let mut m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        if mesh.domain == DomainKind::UnitDisk {
            let r = m[0].hypot(m[1]);
            m = [m[0] / r, m[1] / r];
        }
        let k = vertices.len();
        vertices.push(m);
        parents.push([a, b]);
        midpoint.insert((a.min(b), a.max(b)), k);
        boundary.push([a, k]);
        boundary.push([k, b]);
    }

    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let mut mid = |p: usize, q: usize| {
            *midpoint.entry((p.min(q), p.max(q))).or_insert_with(|| {
                let (pp, pq) = (mesh.vertices[p], mesh.vertices[q]);
                vertices.push([0.5 * (pp[0] + pq[0]), 0.5 * (pp[1] + pq[1])]);
                parents.push([p, q]);
                vertices.len() - 1
            })
        };
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let fine = Mesh::from_parts(vertices, triangles, boundary, mesh.domain)?;
    Ok((fine, parents))
}

/// Transfers nodal values from a coarse mesh to its red refinement by linear
/// interpolation along the parent edges.
pub fn prolongate(parents: &[[usize; 2]], coarse: &[f64]) -> Vec<f64> {
    parents.iter().map(|&[a, b]| 0.5 * (coarse[a] + coarse[b])).collect()
}

/// Outcome of [`validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub passed: bool,
    pub diagnostics: Vec<String>,
    /// h divided by the smallest triangle size, measured as 2√3 times the inradius.
    pub quality_ratio: f64,
}

impl ValidationReport {
    pub fn mentions(&self, needle: &str) -> bool {
        self.diagnostics.iter().any(|d| d.contains(needle))
    }
}

/// Checks all mesh invariants and the quasi-uniformity bound. Never fails;
/// problems are reported as diagnostics.
pub fn validate(mesh: &Mesh) -> ValidationReport {
    let mut diag = Vec::new();
    let n = mesh.vertices.len();

    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let area = signed_area(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        if area <= 0.0 {
            diag.push(format!("triangle {t}: negative area {area:e}"));
        }
    }

    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut boundary_set: HashMap<(usize, usize), usize> = HashMap::new();
    for &[a, b] in &mesh.boundary_edges {
        *boundary_set.entry((a.min(b), a.max(b))).or_default() += 1;
    }
    for (&(a, b), &k) in &boundary_set {
        if k > 1 {
            diag.push(format!("boundary chain lists edge ({a},{b}) {k} times"));
        }
        match edge_count.get(&(a, b)) {
            Some(1) => {}
            Some(c) => diag.push(format!("boundary edge ({a},{b}) belongs to {c} triangles")),
            None => diag.push(format!("boundary chain edge ({a},{b}) is dangling (no triangle)")),
        }
    }
    for (&(a, b), &c) in &edge_count {
        let on_boundary = boundary_set.contains_key(&(a, b));
        if !on_boundary && c != 2 {
            diag.push(format!("interior edge ({a},{b}) belongs to {c} triangles"));
        }
    }

    diag.extend(check_chain(mesh));

    if mesh.domain == DomainKind::UnitDisk {
        for (i, p) in mesh.vertices.iter().enumerate() {
            if mesh.is_boundary[i] && (p[0].hypot(p[1]) - 1.0).abs() > UNIT_CIRCLE_TOL {
                diag.push(format!("boundary vertex {i} is off the unit circle (|x| = {})", p[0].hypot(p[1])));
            }
        }
    }

    let width = mesh_width(mesh);
    if (width - mesh.h).abs() > 1e-14 * width.max(1.0) {
        diag.push(format!("stored h {} differs from maximal edge length {width}", mesh.h));
    }

    let mut min_size = f64::INFINITY;
    for &[a, b, c] in &mesh.triangles {
        let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let area = signed_area(pa, pb, pc).abs();
        let perimeter = dist(pa, pb) + dist(pb, pc) + dist(pc, pa);
        let inradius = 2.0 * area / perimeter;
        min_size = min_size.min(2.0 * 3f64.sqrt() * inradius);
    }
    let quality_ratio = if n == 0 || mesh.triangles.is_empty() { f64::INFINITY } else { width / min_size };
    if !(quality_ratio <= QUASI_UNIFORMITY_BOUND) {
        diag.push(format!("quasi-uniformity ratio {quality_ratio:.3} exceeds bound {QUASI_UNIFORMITY_BOUND}"));
    }

    ValidationReport { passed: diag.is_empty(), diagnostics: diag, quality_ratio }
}

fn check_chain(mesh: &Mesh) -> Vec<String> {
    let mut diag = Vec::new();
    let edges = &mesh.boundary_edges;
    if edges.is_empty() {
        diag.push("boundary chain is empty".to_string());
        return diag;
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut incoming: HashMap<usize, usize> = HashMap::new();
    for &[a, b] in edges {
        if next.insert(a, b).is_some() {
            diag.push(format!("boundary chain: vertex {a} starts more than one edge"));
        }
        *incoming.entry(b).or_default() += 1;
    }
    for (&v, &k) in &incoming {
        if k != 1 {
            diag.push(format!("boundary chain: vertex {v} ends {k} edges"));
        }
    }
    for &[a, _] in edges {
        if !incoming.contains_key(&a) {
            diag.push(format!("boundary chain: vertex {a} has no incoming edge (chain not closed)"));
        }
    }
    // walk the loop from the first edge
    let start = edges[0][0];
    let mut v = start;
    let mut visited = 0;
    loop {
        match next.get(&v) {
            Some(&w) => {
                visited += 1;
                v = w;
            }
            None => {
                diag.push(format!("boundary chain: open at vertex {v}"));
                break;
            }
        }
        if v == start || visited > edges.len() {
            break;
        }
    }
    if visited != edges.len() {
        diag.push(format!("boundary chain: loop from vertex {start} covers {visited} of {} edges", edges.len()));
    }
    let flagged = mesh.is_boundary.iter().filter(|&&b| b).count();
    if next.len() != flagged {
        diag.push(format!("boundary chain covers {} vertices but {flagged} are flagged", next.len()));
    }
    diag
}
