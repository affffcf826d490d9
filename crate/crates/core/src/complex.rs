//! Topology of a triangulated n-manifold.
//!
//! Simplices of every dimension are stored in per-dimension tables and are
//! addressed by identifier, never by vertex tuple. This admits Δ-complex style
//! gluings (for example the two-triangle torus, whose four corners collapse to
//! a single vertex) in which a vertex tuple does not determine a simplex.
//!
//! All geometry is computed top simplex by top simplex, so every top simplex
//! keeps a table mapping each of its local faces (a bit mask over its corners)
//! to the global simplex and to the order in which the global simplex lists
//! those corners.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

/// Largest supported top dimension. Local faces are addressed by `u32` masks.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("not a manifold: {0}")]
    NonManifold(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
}

/// Identification label attached to one facet of a top simplex.
///
/// Facets carrying the same label are glued. The facet's corners, listed in
/// the order they appear in the top simplex, are reordered by `perm` before
/// matching: position `q` of the glued face is corner `perm[q]` of that list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlueLabel {
    pub name: String,
    pub perm: Option<Vec<usize>>,
}

impl GlueLabel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), perm: None }
    }

    pub fn with_perm(name: impl Into<String>, perm: Vec<usize>) -> Self {
        Self { name: name.into(), perm: Some(perm) }
    }
}

/// A top simplex as given to [`SimplicialComplex::build`].
///
/// `glue`, when present, holds one label per facet; facet `i` is the face
/// opposite corner `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopSimplex {
    pub corners: Vec<usize>,
    pub glue: Option<Vec<GlueLabel>>,
}

impl TopSimplex {
    pub fn plain(corners: Vec<usize>) -> Self {
        Self { corners, glue: None }
    }

    pub fn glued(corners: Vec<usize>, glue: Vec<GlueLabel>) -> Self {
        Self { corners, glue: Some(glue) }
    }
}

/// A k-simplex: its vertices in canonical order and its (k-1)-faces, where
/// `faces[q]` is the face opposite canonical position `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simplex {
    pub vertices: Vec<usize>,
    pub faces: Vec<usize>,
}

/// One local face of a top simplex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalFace {
    /// Global identifier in the table of the face's dimension.
    pub id: usize,
    /// `order[q]` is the local corner sitting at canonical position `q`.
    pub order: Vec<usize>,
}

/// Two top simplices sharing a facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hinge {
    pub facet: usize,
    pub tops: [usize; 2],
    /// Local corner of each top simplex that is not on the shared facet.
    pub apex_local: [usize; 2],
    pub apex_vertices: [usize; 2],
}

/// All simplices containing a given vertex, grouped by dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexStar {
    pub vertex: usize,
    pub by_dim: Vec<Vec<usize>>,
}

impl VertexStar {
    pub fn len(&self) -> usize {
        self.by_dim.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    dim: usize,
    vertex_labels: Vec<usize>,
    simplices: Vec<Vec<Simplex>>,
    cofaces: Vec<Vec<Vec<usize>>>,
    top_faces: Vec<Vec<LocalFace>>,
    facet_instances: Vec<Vec<(usize, usize)>>,
    first_occurrence: Vec<Vec<(usize, u32)>>,
    tops: Vec<TopSimplex>,
    source_index: Vec<usize>,
    glued: bool,
}

struct Link {
    to: usize,
    corr: Vec<usize>,
}

/// Corners of `mask` in ascending order.
pub fn mask_corners(mask: u32) -> Vec<usize> {
    (0..32).filter(|&c| mask & (1 << c) != 0).collect()
}

fn subsets(count: usize) -> impl Iterator<Item = u32> {
    1..(1u32 << count)
}

impl SimplicialComplex {
    /// Plain simplicial complex from vertex tuples.
    pub fn from_tuples(dim: usize, tuples: &[Vec<usize>]) -> Result<Self, ComplexError> {
        let tops: Vec<TopSimplex> = tuples.iter().cloned().map(TopSimplex::plain).collect();
        Self::build(dim, tops)
    }

    /// Builds the complex and all of its subsimplices.
    ///
    /// Without glue labels the input is a simplicial complex: faces are
    /// identified by vertex set, each top simplex is sorted and the list of top
    /// simplices is sorted, so identifiers do not depend on input order. With
    /// glue labels (on every top simplex) facets are identified by label,
    /// lower faces through the facet identifications, and vertices by name as
    /// well as through the gluing; the input order is kept.
    pub fn build(dim: usize, tops: Vec<TopSimplex>) -> Result<Self, ComplexError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(ComplexError::MalformedInput(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if tops.is_empty() {
            return Err(ComplexError::MalformedInput("no top simplices".into()));
        }
        let glued_count = tops.iter().filter(|t| t.glue.is_some()).count();
        if glued_count != 0 && glued_count != tops.len() {
            return Err(ComplexError::MalformedInput(
                "glue labels must be given on every top simplex or on none".into(),
            ));
        }
        let glued = glued_count != 0;
        for (t, top) in tops.iter().enumerate() {
            if top.corners.len() != dim + 1 {
                return Err(ComplexError::MalformedInput(format!(
                    "top simplex {t} has {} corners, expected {}",
                    top.corners.len(),
                    dim + 1
                )));
            }
            if let Some(glue) = &top.glue {
                if glue.len() != dim + 1 {
                    return Err(ComplexError::MalformedInput(format!(
                        "top simplex {t} has {} glue labels, expected {}",
                        glue.len(),
                        dim + 1
                    )));
                }
                for label in glue {
                    if let Some(perm) = &label.perm {
                        let mut seen = vec![false; dim];
                        let ok = perm.len() == dim
                            && perm.iter().all(|&p| p < dim && !std::mem::replace(&mut seen[p], true));
                        if !ok {
                            return Err(ComplexError::MalformedInput(format!(
                                "glue label '{}' on top simplex {t} has an invalid permutation",
                                label.name
                            )));
                        }
                    }
                }
            } else {
                let mut sorted = top.corners.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(ComplexError::MalformedInput(format!(
                        "top simplex {t} repeats a vertex"
                    )));
                }
            }
        }

        let (tops, source_index) = if glued {
            let idx = (0..tops.len()).collect();
            (tops, idx)
        } else {
            let mut indexed: Vec<(usize, TopSimplex)> = tops
                .into_iter()
                .map(|mut t| {
                    t.corners.sort_unstable();
                    t
                })
                .enumerate()
                .collect();
            indexed.sort_by(|a, b| a.1.corners.cmp(&b.1.corners));
            let source_index = indexed.iter().map(|(i, _)| *i).collect();
            (indexed.into_iter().map(|(_, t)| t).collect(), source_index)
        };

        let per_top = 1usize << (dim + 1);
        let node_count = tops.len() * per_top;
        let node = |t: usize, mask: u32| t * per_top + mask as usize;
        let mut links: Vec<Vec<Link>> = (0..node_count).map(|_| Vec::new()).collect();
        let mut connect = |a: usize, b: usize, corr: Vec<usize>| {
            let mut inverse = vec![0; corr.len()];
            for (p, &q) in corr.iter().enumerate() {
                inverse[q] = p;
            }
            links[a].push(Link { to: b, corr });
            links[b].push(Link { to: a, corr: inverse });
        };

        if glued {
            let mut by_name: HashMap<usize, usize> = HashMap::new();
            for (t, top) in tops.iter().enumerate() {
                for (c, &name) in top.corners.iter().enumerate() {
                    let here = node(t, 1 << c);
                    match by_name.get(&name) {
                        Some(&first) => connect(first, here, vec![0]),
                        None => {
                            by_name.insert(name, here);
                        }
                    }
                }
            }
            let mut by_label: HashMap<&str, Vec<(usize, Vec<usize>)>> = HashMap::new();
            let mut label_order: Vec<&str> = Vec::new();
            for (t, top) in tops.iter().enumerate() {
                let glue = top.glue.as_ref().expect("glued mode");
                for (i, label) in glue.iter().enumerate() {
                    let facet: Vec<usize> = (0..=dim).filter(|&c| c != i).collect();
                    let seq: Vec<usize> = match &label.perm {
                        Some(p) => p.iter().map(|&q| facet[q]).collect(),
                        None => facet,
                    };
                    let entry = by_label.entry(label.name.as_str()).or_default();
                    if entry.is_empty() {
                        label_order.push(label.name.as_str());
                    }
                    entry.push((t, seq));
                }
            }
            for name in label_order {
                let occ = &by_label[name];
                if occ.len() > 2 {
                    return Err(ComplexError::NonManifold(format!(
                        "facet label '{name}' used {} times",
                        occ.len()
                    )));
                }
                if occ.len() < 2 {
                    continue;
                }
                let (t1, seq1) = &occ[0];
                let (t2, seq2) = &occ[1];
                for s in subsets(dim) {
                    let chosen: Vec<usize> = mask_corners(s);
                    let mask1: u32 = chosen.iter().map(|&q| 1u32 << seq1[q]).sum();
                    let mask2: u32 = chosen.iter().map(|&q| 1u32 << seq2[q]).sum();
                    let list1 = mask_corners(mask1);
                    let list2 = mask_corners(mask2);
                    let corr = list1
                        .iter()
                        .map(|&c| {
                            let q = seq1.iter().position(|&x| x == c).expect("corner on facet");
                            list2.iter().position(|&x| x == seq2[q]).expect("partner corner")
                        })
                        .collect();
                    connect(node(*t1, mask1), node(*t2, mask2), corr);
                }
            }
        } else {
            let mut by_key: HashMap<Vec<usize>, usize> = HashMap::new();
            for (t, top) in tops.iter().enumerate() {
                for mask in subsets(dim + 1) {
                    let key: Vec<usize> = mask_corners(mask).iter().map(|&c| top.corners[c]).collect();
                    let here = node(t, mask);
                    let len = key.len();
                    match by_key.get(&key) {
                        Some(&first) => connect(first, here, (0..len).collect()),
                        None => {
                            by_key.insert(key, here);
                        }
                    }
                }
            }
        }

        // Classes of identified local faces, with the permutation relating
        // each instance to the class representative.
        let mut class_of = vec![usize::MAX; node_count];
        let mut canon_pos: Vec<Vec<usize>> = vec![Vec::new(); node_count];
        let mut class_nodes: Vec<Vec<Vec<usize>>> = vec![Vec::new(); dim + 1];
        for t in 0..tops.len() {
            for mask in subsets(dim + 1) {
                let start = node(t, mask);
                if class_of[start] != usize::MAX {
                    continue;
                }
                let k = mask.count_ones() as usize - 1;
                let id = class_nodes[k].len();
                let mut members = vec![start];
                class_of[start] = id;
                canon_pos[start] = (0..=k).collect();
                let mut queue = VecDeque::from([start]);
                while let Some(cur) = queue.pop_front() {
                    for link in &links[cur] {
                        let pos: Vec<usize> = canon_pos[cur].iter().map(|&p| link.corr[p]).collect();
                        if class_of[link.to] == usize::MAX {
                            class_of[link.to] = id;
                            canon_pos[link.to] = pos;
                            members.push(link.to);
                            queue.push_back(link.to);
                        } else if canon_pos[link.to] != pos && k > 0 {
                            return Err(ComplexError::MalformedInput(format!(
                                "a {k}-face is identified with itself under a nontrivial permutation"
                            )));
                        }
                    }
                }
                class_nodes[k].push(members);
            }
        }

        // Vertices are numbered by their smallest corner name.
        let min_name = |members: &Vec<usize>| {
            members
                .iter()
                .map(|&nd| {
                    let t = nd / per_top;
                    let c = (nd % per_top).trailing_zeros() as usize;
                    tops[t].corners[c]
                })
                .min()
                .expect("nonempty class")
        };
        let mut vertex_order: Vec<usize> = (0..class_nodes[0].len()).collect();
        vertex_order.sort_by_key(|&cls| min_name(&class_nodes[0][cls]));
        let mut vertex_rank = vec![0; vertex_order.len()];
        for (rank, &cls) in vertex_order.iter().enumerate() {
            vertex_rank[cls] = rank;
        }
        let vertex_labels: Vec<usize> = vertex_order.iter().map(|&cls| min_name(&class_nodes[0][cls])).collect();
        for nd in 0..node_count {
            if nd % per_top != 0 && (nd % per_top).count_ones() == 1 {
                class_of[nd] = vertex_rank[class_of[nd]];
            }
        }
        let mut reordered = vec![Vec::new(); vertex_order.len()];
        for (cls, members) in class_nodes[0].drain(..).enumerate() {
            reordered[vertex_rank[cls]] = members;
        }
        class_nodes[0] = reordered;

        let mut top_faces: Vec<Vec<LocalFace>> = Vec::with_capacity(tops.len());
        for t in 0..tops.len() {
            let mut faces = Vec::with_capacity(per_top);
            faces.push(LocalFace { id: usize::MAX, order: Vec::new() });
            for mask in subsets(dim + 1) {
                let nd = node(t, mask);
                let corners = mask_corners(mask);
                let order = canon_pos[nd].iter().map(|&p| corners[p]).collect();
                faces.push(LocalFace { id: class_of[nd], order });
            }
            top_faces.push(faces);
        }

        let mut simplices: Vec<Vec<Simplex>> = vec![Vec::new(); dim + 1];
        let mut first_occurrence: Vec<Vec<(usize, u32)>> = vec![Vec::new(); dim + 1];
        for k in 0..=dim {
            for members in &class_nodes[k] {
                let root = members[0];
                let t = root / per_top;
                let mask = (root % per_top) as u32;
                let face = &top_faces[t][mask as usize];
                let vertices = face.order.iter().map(|&c| top_faces[t][1 << c].id).collect();
                let faces = if k == 0 {
                    Vec::new()
                } else {
                    face.order.iter().map(|&c| top_faces[t][(mask & !(1 << c)) as usize].id).collect()
                };
                simplices[k].push(Simplex { vertices, faces });
                first_occurrence[k].push((t, mask));
            }
        }

        let mut cofaces: Vec<Vec<Vec<usize>>> = (0..=dim).map(|k| vec![Vec::new(); simplices[k].len()]).collect();
        for k in 1..=dim {
            for (id, s) in simplices[k].iter().enumerate() {
                for &f in &s.faces {
                    if !cofaces[k - 1][f].contains(&id) {
                        cofaces[k - 1][f].push(id);
                    }
                }
            }
        }

        let full = (1u32 << (dim + 1)) - 1;
        let mut facet_instances: Vec<Vec<(usize, usize)>> = vec![Vec::new(); simplices[dim - 1].len()];
        for t in 0..tops.len() {
            for c in 0..=dim {
                let f = top_faces[t][(full & !(1 << c)) as usize].id;
                facet_instances[f].push((t, c));
            }
        }
        for (f, inst) in facet_instances.iter().enumerate() {
            if inst.len() > 2 {
                return Err(ComplexError::NonManifold(format!(
                    "{}-simplex {f} has {} cofaces",
                    dim - 1,
                    inst.len()
                )));
            }
        }

        let complex = Self {
            dim,
            vertex_labels,
            simplices,
            cofaces,
            top_faces,
            facet_instances,
            first_occurrence,
            tops,
            source_index,
            glued,
        };
        if (2..=3).contains(&dim) {
            complex.check_vertex_links()?;
        }
        Ok(complex)
    }

    /// Corners around each vertex must be connected through shared facets.
    fn check_vertex_links(&self) -> Result<(), ComplexError> {
        let n = self.dim;
        let corner = |t: usize, c: usize| t * (n + 1) + c;
        let mut parent: Vec<usize> = (0..self.tops.len() * (n + 1)).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let full = (1u32 << (n + 1)) - 1;
        for inst in &self.facet_instances {
            if let [(t1, c1), (t2, c2)] = inst[..] {
                let o1 = &self.top_faces[t1][(full & !(1 << c1)) as usize].order;
                let o2 = &self.top_faces[t2][(full & !(1 << c2)) as usize].order;
                for (&a, &b) in o1.iter().zip(o2) {
                    let ra = find(&mut parent, corner(t1, a));
                    let rb = find(&mut parent, corner(t2, b));
                    parent[ra] = rb;
                }
            }
        }
        let mut component: Vec<Option<usize>> = vec![None; self.num_vertices()];
        for t in 0..self.tops.len() {
            for c in 0..=n {
                let v = self.top_faces[t][1 << c].id;
                let r = find(&mut parent, corner(t, c));
                match component[v] {
                    None => component[v] = Some(r),
                    Some(existing) if existing != r => {
                        return Err(ComplexError::NonManifold(format!(
                            "link of vertex {} is disconnected",
                            self.vertex_labels[v]
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.simplices[0].len()
    }

    pub fn num_edges(&self) -> usize {
        self.simplices[1].len()
    }

    pub fn num_tops(&self) -> usize {
        self.simplices[self.dim].len()
    }

    pub fn num_simplices(&self, k: usize) -> usize {
        self.simplices.get(k).map_or(0, Vec::len)
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        &self.simplices[k]
    }

    pub fn simplex(&self, k: usize, id: usize) -> &Simplex {
        &self.simplices[k][id]
    }

    /// Canonical endpoints of an edge: tail first.
    pub fn edge_vertices(&self, e: usize) -> [usize; 2] {
        let v = &self.simplices[1][e].vertices;
        [v[0], v[1]]
    }

    pub fn cofaces(&self, k: usize, id: usize) -> &[usize] {
        &self.cofaces[k][id]
    }

    pub fn vertex_label(&self, v: usize) -> usize {
        self.vertex_labels[v]
    }

    pub fn vertex_labels(&self) -> &[usize] {
        &self.vertex_labels
    }

    pub fn vertex_by_label(&self, label: usize) -> Option<usize> {
        self.vertex_labels.iter().position(|&l| l == label)
    }

    /// Top simplices as stored (canonicalized in plain mode).
    pub fn tops(&self) -> &[TopSimplex] {
        &self.tops
    }

    /// Position of each stored top simplex in the input list.
    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    pub fn is_glued(&self) -> bool {
        self.glued
    }

    /// Local face `mask` of top simplex `t`.
    pub fn local_face(&self, t: usize, mask: u32) -> &LocalFace {
        &self.top_faces[t][mask as usize]
    }

    pub fn top_vertex(&self, t: usize, corner: usize) -> usize {
        self.top_faces[t][1 << corner].id
    }

    /// Edge joining local corners `a` and `b` of top simplex `t`, and whether
    /// the direction `a -> b` is the edge's canonical direction.
    pub fn local_edge(&self, t: usize, a: usize, b: usize) -> (usize, bool) {
        let face = &self.top_faces[t][((1u32 << a) | (1u32 << b)) as usize];
        (face.id, face.order[0] == a)
    }

    /// A top simplex containing the simplex together with its local mask there.
    pub fn first_occurrence(&self, k: usize, id: usize) -> (usize, u32) {
        self.first_occurrence[k][id]
    }

    /// Top simplices incident to each facet as `(top, opposite local corner)`.
    pub fn facet_instances(&self, facet: usize) -> &[(usize, usize)] {
        &self.facet_instances[facet]
    }

    pub fn is_boundary_facet(&self, facet: usize) -> bool {
        self.facet_instances[facet].len() == 1
    }

    pub fn boundary_facets(&self) -> Vec<usize> {
        (0..self.facet_instances.len()).filter(|&f| self.is_boundary_facet(f)).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.facet_instances.iter().all(|i| i.len() == 2)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(k, s)| if k % 2 == 0 { s.len() as i64 } else { -(s.len() as i64) })
            .sum()
    }

    /// A facet whose two instances lie in the same top simplex, which is
    /// folded onto itself along it; such a facet has no hinge.
    pub fn is_folded_facet(&self, facet: usize) -> bool {
        matches!(self.facet_instances[facet][..], [(t1, _), (t2, _)] if t1 == t2)
    }

    /// One hinge per interior facet that is not folded, in facet order.
    pub fn hinges(&self) -> Vec<Hinge> {
        self.facet_instances
            .iter()
            .enumerate()
            .filter_map(|(facet, inst)| match inst[..] {
                [(t1, c1), (t2, c2)] if t1 != t2 => Some(Hinge {
                    facet,
                    tops: [t1, t2],
                    apex_local: [c1, c2],
                    apex_vertices: [self.top_vertex(t1, c1), self.top_vertex(t2, c2)],
                }),
                _ => None,
            })
            .collect()
    }

    /// The hinge at an interior facet, `None` on the boundary or at a fold.
    pub fn hinge_at(&self, facet: usize) -> Option<Hinge> {
        match self.facet_instances[facet][..] {
            [(t1, c1), (t2, c2)] if t1 != t2 => Some(Hinge {
                facet,
                tops: [t1, t2],
                apex_local: [c1, c2],
                apex_vertices: [self.top_vertex(t1, c1), self.top_vertex(t2, c2)],
            }),
            _ => None,
        }
    }

    pub fn vertex_star(&self, v: usize) -> Result<VertexStar, ComplexError> {
        if v >= self.num_vertices() {
            return Err(ComplexError::UnknownVertex(v));
        }
        let by_dim = self
            .simplices
            .iter()
            .map(|table| {
                table
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.vertices.contains(&v))
                    .map(|(id, _)| id)
                    .collect()
            })
            .collect();
        Ok(VertexStar { vertex: v, by_dim })
    }

    /// Vertex degree counted over edge identifiers (a loop counts twice).
    pub fn vertex_degree(&self, v: usize) -> usize {
        self.simplices[1]
            .iter()
            .map(|e| e.vertices.iter().filter(|&&x| x == v).count())
            .sum()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut adj = vec![Vec::new(); n];
        for e in &self.simplices[1] {
            adj[e.vertices[0]].push(e.vertices[1]);
            adj[e.vertices[1]].push(e.vertices[0]);
        }
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !std::mem::replace(&mut seen[w], true) {
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
