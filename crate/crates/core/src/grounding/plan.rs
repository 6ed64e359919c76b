//! Counting engine. A formula is compiled into unary factors per variable
//! and edge factors per linked variable pair. When the variable graph is a
//! forest, counts for every target individual come out of one bottom-up
//! message pass; otherwise assignments are enumerated along the chain with
//! adjacency-driven domains.

use std::collections::BTreeMap;

use crate::database::{AttributeValues, Relation, RelationalDatabase};
use crate::schema::{Formula, Literal};

type Beliefs = (Vec<Option<Vec<f64>>>, Vec<Option<(usize, usize)>>);

enum UnaryFactor<'a> {
    Equals {
        codes: &'a [Option<u32>],
        code: Option<u32>,
    },
    Continuous(&'a [f64]),
    SelfLoop(&'a Relation),
}

impl UnaryFactor<'_> {
    fn value(&self, x: usize) -> f64 {
        match self {
            UnaryFactor::Equals { codes, code } => {
                if code.is_some() && codes[x] == *code {
                    1.0
                } else {
                    0.0
                }
            }
            UnaryFactor::Continuous(v) => v[x],
            UnaryFactor::SelfLoop(r) => {
                if r.contains(x, x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One relation literal between two distinct variables.
struct EdgeLiteral<'a> {
    rel: &'a Relation,
    /// Variable index in the first argument slot.
    first: usize,
}

impl EdgeLiteral<'_> {
    /// Whether the literal holds with `var = x` and the other end `= y`.
    fn holds(&self, var: usize, x: usize, y: usize) -> bool {
        if self.first == var {
            self.rel.contains(x, y)
        } else {
            self.rel.contains(y, x)
        }
    }

    /// Individuals `y` of the other variable linked to `x` of `var`.
    fn neighbours(&self, var: usize, x: usize) -> &[u32] {
        if self.first == var {
            self.rel.successors(x)
        } else {
            self.rel.predecessors(x)
        }
    }
}

/// All relation literals between one pair of variables.
struct Edge<'a> {
    a: usize,
    b: usize,
    literals: Vec<EdgeLiteral<'a>>,
}

impl Edge<'_> {
    fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }

    /// Calls `f(y)` for every `y` of the other variable with all literals true.
    fn for_each_neighbour(&self, var: usize, x: usize, mut f: impl FnMut(usize)) {
        let (head, rest) = self.literals.split_first().expect("edge without literals");
        for &y in head.neighbours(var, x) {
            let y = y as usize;
            if rest.iter().all(|l| l.holds(var, x, y)) {
                f(y);
            }
        }
    }
}

pub(crate) struct Plan<'a> {
    names: Vec<String>,
    sizes: Vec<usize>,
    unary: Vec<Vec<UnaryFactor<'a>>>,
    edges: Vec<Edge<'a>>,
    /// Edge indices per variable.
    incident: Vec<Vec<usize>>,
    target: Option<usize>,
    is_forest: bool,
}

impl<'a> Plan<'a> {
    /// Panics if the formula mentions declarations missing from `db`;
    /// callers validate first.
    pub(crate) fn new(f: &Formula, target_var: &str, db: &'a RelationalDatabase) -> Self {
        let names: Vec<String> = f.vars().keys().cloned().collect();
        let index: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let sizes = f.vars().values().map(|p| db.population_size(p)).collect();
        let mut unary: Vec<Vec<UnaryFactor<'a>>> = (0..names.len()).map(|_| Vec::new()).collect();
        let mut edge_map: BTreeMap<(usize, usize), Vec<EdgeLiteral<'a>>> = BTreeMap::new();
        for lit in f.literals() {
            match lit {
                Literal::Relation { name, args } => {
                    let rel = db.relation(name).expect("validated relation");
                    let (a, b) = (index[args[0].as_str()], index[args[1].as_str()]);
                    if a == b {
                        unary[a].push(UnaryFactor::SelfLoop(rel));
                    } else {
                        edge_map
                            .entry((a.min(b), a.max(b)))
                            .or_default()
                            .push(EdgeLiteral { rel, first: a });
                    }
                }
                Literal::Equals {
                    attribute,
                    var,
                    value,
                } => {
                    let codes = match db.attribute_values(attribute) {
                        Some(AttributeValues::Discrete(c)) => c.as_slice(),
                        _ => panic!("validated discrete attribute `{attribute}`"),
                    };
                    unary[index[var.as_str()]].push(UnaryFactor::Equals {
                        codes,
                        code: db.value_code(attribute, value),
                    });
                }
                Literal::Continuous { attribute, var } => {
                    let values = db
                        .continuous_values(attribute)
                        .expect("validated continuous attribute");
                    unary[index[var.as_str()]].push(UnaryFactor::Continuous(values));
                }
            }
        }
        let edges: Vec<Edge<'a>> = edge_map
            .into_iter()
            .map(|((a, b), literals)| Edge { a, b, literals })
            .collect();
        let mut incident = vec![Vec::new(); names.len()];
        for (e, edge) in edges.iter().enumerate() {
            incident[edge.a].push(e);
            incident[edge.b].push(e);
        }
        // forest iff no edge closes a cycle
        let mut parent: Vec<usize> = (0..names.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut is_forest = true;
        for edge in &edges {
            let (ra, rb) = (find(&mut parent, edge.a), find(&mut parent, edge.b));
            if ra == rb {
                is_forest = false;
            } else {
                parent[ra] = rb;
            }
        }
        let target = index.get(target_var).copied();
        Plan {
            names,
            sizes,
            unary,
            edges,
            incident,
            target,
            is_forest,
        }
    }

    pub(crate) fn is_forest(&self) -> bool {
        self.is_forest
    }

    pub(crate) fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn local(&self, v: usize, x: usize) -> f64 {
        self.unary[v].iter().map(|u| u.value(x)).product()
    }

    fn local_vector(&self, v: usize) -> Vec<f64> {
        (0..self.sizes[v]).map(|x| self.local(v, x)).collect()
    }

    /// Children lists and a post-order (leaves first) for the tree rooted at `root`.
    fn rooted(&self, root: usize) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
        // parent_of[v] = (parent variable, edge index)
        let mut parent_of: Vec<Option<(usize, usize)>> = vec![None; self.names.len()];
        let mut order = vec![root];
        let mut seen = vec![false; self.names.len()];
        seen[root] = true;
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            for &e in &self.incident[v] {
                let c = self.edges[e].other(v);
                if !seen[c] {
                    seen[c] = true;
                    parent_of[c] = Some((v, e));
                    order.push(c);
                }
            }
            i += 1;
        }
        order.reverse();
        (order, parent_of)
    }

    /// Belief vectors `local(v) * prod(messages from children)` for one
    /// rooted component, computed leaves-first.
    fn beliefs(&self, root: usize) -> Beliefs {
        let (post, parent_of) = self.rooted(root);
        let mut belief: Vec<Option<Vec<f64>>> = vec![None; self.names.len()];
        for &v in &post {
            belief[v] = Some(self.local_vector(v));
        }
        for &c in &post {
            if let Some((p, e)) = parent_of[c] {
                let child = belief[c].take().expect("child belief");
                let msg = self.message(e, p, &child);
                let pb = belief[p].as_mut().expect("parent belief");
                for (b, m) in pb.iter_mut().zip(&msg) {
                    *b *= m;
                }
                belief[c] = Some(child);
            }
        }
        (belief, parent_of)
    }

    /// `msg(x_p) = sum over linked x_c of belief_c(x_c)`.
    fn message(&self, e: usize, parent: usize, child_belief: &[f64]) -> Vec<f64> {
        let edge = &self.edges[e];
        (0..self.sizes[parent])
            .map(|x| {
                let mut s = 0.0;
                edge.for_each_neighbour(parent, x, |y| s += child_belief[y]);
                s
            })
            .collect()
    }

    fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.names.len()];
        let mut roots = Vec::new();
        // the target's component is rooted at the target
        let starts: Vec<usize> = self.target.into_iter().chain(0..self.names.len()).collect();
        for s in starts {
            if comp[s] != usize::MAX {
                continue;
            }
            roots.push(s);
            let mut stack = vec![s];
            comp[s] = s;
            while let Some(v) = stack.pop() {
                for &e in &self.incident[v] {
                    let c = self.edges[e].other(v);
                    if comp[c] == usize::MAX {
                        comp[c] = s;
                        stack.push(c);
                    }
                }
            }
        }
        roots
    }

    /// Count for every individual of the target population of size `n`.
    pub(crate) fn column(&self, n: usize) -> Vec<f64> {
        if !self.is_forest {
            return (0..n).map(|z| self.enumerate(Some(z), None).0).collect();
        }
        let mut constant = 1.0;
        let mut target_belief = None;
        for root in self.components() {
            let (mut belief, _) = self.beliefs(root);
            let b = belief[root].take().expect("root belief");
            if Some(root) == self.target {
                target_belief = Some(b);
            } else {
                constant *= b.iter().sum::<f64>();
            }
        }
        match target_belief {
            Some(b) => b.into_iter().map(|v| v * constant).collect(),
            None => vec![constant; n],
        }
    }

    /// Count for one target individual.
    pub(crate) fn count(&self, z: usize) -> f64 {
        if self.is_forest {
            let col = self.column(z + 1);
            return col[z];
        }
        self.enumerate(Some(z), None).0
    }

    /// For every target individual `z`, the count split by the individual
    /// assigned to `pinned`: entries `(m, c)` with `c` the number of
    /// groundings having `pinned = m`. Entries with zero count are omitted.
    pub(crate) fn split_by(&self, pinned: usize, n: usize) -> Vec<Vec<(usize, f64)>> {
        let same_component = self.target.is_some_and(|t| self.connected(t, pinned));
        if !self.is_forest || !same_component || self.target == Some(pinned) {
            return (0..n)
                .map(|z| {
                    let (_, by) = self.enumerate(Some(z), Some(pinned));
                    by.into_iter().filter(|(_, c)| *c != 0.0).collect()
                })
                .collect();
        }
        let t = self.target.expect("target in component");
        let (belief, parent_of) = self.beliefs(t);
        // path from target down to pinned
        let mut path = vec![pinned];
        while let Some((p, _)) = parent_of[*path.last().expect("path")] {
            path.push(p);
        }
        path.reverse();
        // belief of each path node with the message from its path child removed
        let mut off_path: Vec<Vec<f64>> = Vec::with_capacity(path.len());
        for (i, &v) in path.iter().enumerate() {
            let mut b = self.local_vector(v);
            for &e in &self.incident[v] {
                let c = self.edges[e].other(v);
                let is_child = parent_of[c].is_some_and(|(p, _)| p == v);
                let on_path = path.get(i + 1) == Some(&c);
                if is_child && !on_path {
                    let msg = self.message(e, v, belief[c].as_ref().expect("belief"));
                    for (x, m) in b.iter_mut().zip(&msg) {
                        *x *= m;
                    }
                }
            }
            off_path.push(b);
        }
        let mut constant = 1.0;
        for root in self.components() {
            if root != t {
                let (mut b, _) = self.beliefs(root);
                constant *= b[root].take().expect("root").iter().sum::<f64>();
            }
        }
        let mut scratch = vec![0.0; self.sizes.iter().copied().max().unwrap_or(0)];
        let mut marked = vec![false; scratch.len()];
        (0..n)
            .map(|z| {
                let w0 = off_path[0][z] * constant;
                if w0 == 0.0 {
                    return Vec::new();
                }
                let mut cur = vec![(z, w0)];
                for i in 1..path.len() {
                    let (_, e) = parent_of[path[i]].expect("path edge");
                    let edge = &self.edges[e];
                    let mut touched = Vec::new();
                    for &(x, w) in &cur {
                        edge.for_each_neighbour(path[i - 1], x, |y| {
                            if !marked[y] {
                                marked[y] = true;
                                touched.push(y);
                            }
                            scratch[y] += w;
                        });
                    }
                    touched.sort_unstable();
                    cur = touched
                        .iter()
                        .filter_map(|&y| {
                            let v = scratch[y] * off_path[i][y];
                            scratch[y] = 0.0;
                            marked[y] = false;
                            (v != 0.0).then_some((y, v))
                        })
                        .collect();
                }
                cur
            })
            .collect()
    }

    fn connected(&self, a: usize, b: usize) -> bool {
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(v) = stack.pop() {
            if v == b {
                return true;
            }
            for &e in &self.incident[v] {
                let c = self.edges[e].other(v);
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Backtracking enumeration with the target fixed to `z`. Returns the
    /// total and, when `pinned` is set, the total split by that variable.
    fn enumerate(&self, z: Option<usize>, pinned: Option<usize>) -> (f64, BTreeMap<usize, f64>) {
        let n = self.names.len();
        // order: breadth-first from the target, then remaining components
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let starts: Vec<usize> = self.target.into_iter().chain(0..n).collect();
        for s in starts {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            order.push(s);
            let mut i = order.len() - 1;
            while i < order.len() {
                let v = order[i];
                for &e in &self.incident[v] {
                    let c = self.edges[e].other(v);
                    if !seen[c] {
                        seen[c] = true;
                        order.push(c);
                    }
                }
                i += 1;
            }
        }
        let position: Vec<usize> = {
            let mut p = vec![0; n];
            for (i, &v) in order.iter().enumerate() {
                p[v] = i;
            }
            p
        };
        // edges to check when a variable is assigned: those whose other end came earlier
        let back_edges: Vec<Vec<usize>> = order
            .iter()
            .map(|&v| {
                self.incident[v]
                    .iter()
                    .copied()
                    .filter(|&e| position[self.edges[e].other(v)] < position[v])
                    .collect()
            })
            .collect();
        let mut assignment = vec![usize::MAX; n];
        let mut by = BTreeMap::new();
        let total = self.descend(
            0,
            1.0,
            &order,
            &back_edges,
            z,
            pinned,
            &mut assignment,
            &mut by,
        );
        (total, by)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        depth: usize,
        weight: f64,
        order: &[usize],
        back_edges: &[Vec<usize>],
        z: Option<usize>,
        pinned: Option<usize>,
        assignment: &mut [usize],
        by: &mut BTreeMap<usize, f64>,
    ) -> f64 {
        if depth == order.len() {
            if let Some(p) = pinned {
                *by.entry(assignment[p]).or_insert(0.0) += weight;
            }
            return weight;
        }
        let v = order[depth];
        let candidates: Vec<usize> = match (Some(v) == self.target, z, back_edges[depth].first()) {
            (true, Some(z), _) => vec![z],
            (_, _, Some(&e)) => {
                let edge = &self.edges[e];
                let u = edge.other(v);
                let mut out = Vec::new();
                edge.for_each_neighbour(u, assignment[u], |y| out.push(y));
                out
            }
            _ => (0..self.sizes[v]).collect(),
        };
        let mut total = 0.0;
        for x in candidates {
            let ok = back_edges[depth].iter().all(|&e| {
                let edge = &self.edges[e];
                let u = edge.other(v);
                edge.literals.iter().all(|l| l.holds(u, assignment[u], x))
            });
            if !ok {
                continue;
            }
            let w = weight * self.local(v, x);
            if w == 0.0 {
                continue;
            }
            assignment[v] = x;
            total += self.descend(depth + 1, w, order, back_edges, z, pinned, assignment, by);
        }
        assignment[v] = usize::MAX;
        total
    }
}
