//! Discrete distributed constraint optimization: a problem representation
//! with agent-owned variables, a complete solver (dynamic programming over a
//! pseudo-tree: utility tables up, value assignments down), and a brute-force
//! oracle.
//!
//! Costs are minimized; hard constraints are encoded as infinite cost.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::DcopError;
use crate::ids::UserId;

/// A constraint cost: finite, or the hard-violation sentinel that orders
/// above every finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl std::ops::Add for Cost {
    type Output = Cost;

    fn add(self, other: Cost) -> Cost {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => Cost::Finite(a + b),
            _ => Cost::Infinite,
        }
    }
}

impl Cost {
    pub const ZERO: Cost = Cost::Finite(0.0);

    pub fn is_finite(&self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    pub fn min(self, other: Cost) -> Cost {
        if other.lt(&self) {
            other
        } else {
            self
        }
    }

    fn lt(&self, other: &Cost) -> bool {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => a < b,
            (Cost::Finite(_), Cost::Infinite) => true,
            _ => false,
        }
    }
}

impl Serialize for Cost {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cost::Finite(v) => serializer.serialize_f64(*v),
            Cost::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Cost::Finite(v)),
            Raw::Text(s) if s == "inf" => Ok(Cost::Infinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("bad cost `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    pub owner: UserId,
    pub domain: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Explicit cost table over the scope's domain product, row-major in
    /// scope order.
    Table(Vec<Cost>),
    /// Hard constraint: at most `limit` variables of the scope take a
    /// nonzero value.
    AtMostNonzero { limit: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Variable indices into the problem's variable list.
    pub scope: Vec<usize>,
    pub kind: ConstraintKind,
}

impl Constraint {
    /// Cost under `values`, the chosen domain-value indices per scope
    /// position.
    fn evaluate(&self, problem: &DcopProblem, values: &[usize]) -> Cost {
        match &self.kind {
            ConstraintKind::Table(table) => {
                let mut idx = 0;
                for (pos, var) in self.scope.iter().enumerate() {
                    idx = idx * problem.variables[*var].domain.len() + values[pos];
                }
                table[idx]
            }
            ConstraintKind::AtMostNonzero { limit } => {
                let nonzero = self
                    .scope
                    .iter()
                    .zip(values)
                    .filter(|(var, val)| problem.variables[**var].domain[**val] != 0)
                    .count() as u32;
                if nonzero <= *limit {
                    Cost::ZERO
                } else {
                    Cost::Infinite
                }
            }
        }
    }
}

/// Variables are kept sorted by id, so index order is id order and every
/// tie-break below is lexicographic.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DcopProblem {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
}

impl DcopProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        id: impl Into<String>,
        owner: impl Into<UserId>,
        domain: Vec<i64>,
    ) -> Result<(), DcopError> {
        let id = id.into();
        if domain.is_empty() {
            return Err(DcopError::Malformed(format!("variable {id} has an empty domain")));
        }
        if self.variables.iter().any(|v| v.id == id) {
            return Err(DcopError::Malformed(format!("duplicate variable {id}")));
        }
        // Insert at the sorted position and shift the indices existing
        // constraint scopes hold, so interleaving variable and constraint
        // insertion stays sound.
        let at = self.variables.partition_point(|v| v.id < id);
        self.variables.insert(
            at,
            Variable {
                id,
                owner: owner.into(),
                domain,
            },
        );
        for c in &mut self.constraints {
            for s in &mut c.scope {
                if *s >= at {
                    *s += 1;
                }
            }
        }
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        scope: &[&str],
        kind: ConstraintKind,
    ) -> Result<(), DcopError> {
        let name = name.into();
        let mut indices = Vec::with_capacity(scope.len());
        for id in scope {
            let idx = self
                .variables
                .iter()
                .position(|v| v.id == *id)
                .ok_or_else(|| {
                    DcopError::Malformed(format!("constraint {name} names unknown variable {id}"))
                })?;
            indices.push(idx);
        }
        if let ConstraintKind::Table(table) = &kind {
            let want: usize = indices
                .iter()
                .map(|i| self.variables[*i].domain.len())
                .product();
            if table.len() != want {
                return Err(DcopError::Malformed(format!(
                    "constraint {name} table has {} entries, scope wants {want}",
                    table.len()
                )));
            }
        }
        self.constraints.push(Constraint {
            name,
            scope: indices,
            kind,
        });
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn agents(&self) -> BTreeSet<UserId> {
        self.variables.iter().map(|v| v.owner.clone()).collect()
    }

    pub fn var_index(&self, id: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.id == id)
    }

    /// Total cost of a complete assignment given as domain-value indices.
    pub fn evaluate(&self, assignment: &[usize]) -> Cost {
        let mut total = Cost::ZERO;
        for c in &self.constraints {
            let values: Vec<usize> = c.scope.iter().map(|v| assignment[*v]).collect();
            total = total + c.evaluate(self, &values);
        }
        total
    }

    /// Adjacency over variables: two variables are neighbors when they share
    /// a constraint scope.
    fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.variables.len()];
        for c in &self.constraints {
            for (i, a) in c.scope.iter().enumerate() {
                for b in c.scope.iter().skip(i + 1) {
                    if a != b {
                        adj[*a].insert(*b);
                        adj[*b].insert(*a);
                    }
                }
            }
        }
        adj
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }
}

/// Solution: chosen domain value per variable plus the total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DcopSolution {
    pub assignment: BTreeMap<String, i64>,
    pub cost: Cost,
}

// ---------------------------------------------------------------------------
// Pseudo-tree.

/// DFS tree (one root per connected component) with back-edges to ancestors.
#[derive(Debug, Clone)]
pub struct PseudoTree {
    /// Preorder visit sequence of variable indices.
    pub order: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Ancestors reached by non-tree edges, per variable.
    pub pseudo_parents: Vec<Vec<usize>>,
    pub roots: Vec<usize>,
}

impl PseudoTree {
    pub fn tree_edges(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    pub fn back_edges(&self) -> usize {
        self.pseudo_parents.iter().map(|p| p.len()).sum()
    }
}

/// Depth-first traversal from a maximum-degree root (ties broken by id),
/// visiting neighbors in id order; deterministic for a fixed problem.
pub fn build_pseudo_tree(p: &DcopProblem) -> PseudoTree {
    let n = p.variables().len();
    let adj = p.adjacency();
    let mut tree = PseudoTree {
        order: Vec::with_capacity(n),
        parent: vec![None; n],
        children: vec![Vec::new(); n],
        pseudo_parents: vec![Vec::new(); n],
        roots: Vec::new(),
    };
    let mut visited = vec![false; n];
    let mut depth = vec![0usize; n];

    loop {
        let root = (0..n)
            .filter(|v| !visited[*v])
            .max_by(|a, b| adj[*a].len().cmp(&adj[*b].len()).then(b.cmp(a)));
        let Some(root) = root else { break };
        tree.roots.push(root);

        // Iterative DFS; the explicit stack keeps neighbor order ascending.
        let mut stack = vec![(root, None::<usize>)];
        while let Some((v, from)) = stack.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            tree.order.push(v);
            if let Some(parent) = from {
                tree.parent[v] = Some(parent);
                tree.children[parent].push(v);
                depth[v] = depth[parent] + 1;
            }
            for &w in &adj[v] {
                if visited[w] && Some(w) != from {
                    // Ancestor check: in DFS every non-tree edge of an
                    // undirected graph closes toward an ancestor.
                    if is_ancestor(&tree, w, v) {
                        tree.pseudo_parents[v].push(w);
                    }
                }
            }
            for &w in adj[v].iter().rev() {
                if !visited[w] {
                    stack.push((w, Some(v)));
                }
            }
        }
    }
    tree
}

fn is_ancestor(tree: &PseudoTree, candidate: usize, of: usize) -> bool {
    let mut cursor = tree.parent[of];
    while let Some(v) = cursor {
        if v == candidate {
            return true;
        }
        cursor = tree.parent[v];
    }
    false
}

// ---------------------------------------------------------------------------
// Exhaustive oracle.

pub const EXHAUSTIVE_CAP: usize = 1 << 20;

/// Brute-force minimum over all complete assignments; ties resolved toward
/// the lexicographically smallest assignment in variable-id order.
pub fn solve_exhaustive(p: &DcopProblem) -> Result<DcopSolution, DcopError> {
    let dims: Vec<usize> = p.variables().iter().map(|v| v.domain.len()).collect();
    let space: usize = dims.iter().product();
    if space > EXHAUSTIVE_CAP {
        return Err(DcopError::ExhaustiveCap(space, EXHAUSTIVE_CAP));
    }
    let mut current = vec![0usize; dims.len()];
    let mut best = p.evaluate(&current);
    let mut best_assignment = current.clone();
    while increment(&mut current, &dims) {
        let cost = p.evaluate(&current);
        if cost.lt(&best) {
            best = cost;
            best_assignment = current.clone();
        }
    }
    Ok(DcopSolution {
        assignment: to_named(p, &best_assignment),
        cost: best,
    })
}

fn increment(current: &mut [usize], dims: &[usize]) -> bool {
    for i in (0..current.len()).rev() {
        current[i] += 1;
        if current[i] < dims[i] {
            return true;
        }
        current[i] = 0;
    }
    false
}

fn to_named(p: &DcopProblem, assignment: &[usize]) -> BTreeMap<String, i64> {
    p.variables()
        .iter()
        .zip(assignment)
        .map(|(v, idx)| (v.id.clone(), v.domain[*idx]))
        .collect()
}

// ---------------------------------------------------------------------------
// DPOP.

#[derive(Debug, Clone)]
pub struct DpopConfig {
    /// Cap on a single utility table's entry count.
    pub max_table_entries: usize,
}

impl Default for DpopConfig {
    fn default() -> Self {
        Self {
            max_table_entries: 1 << 22,
        }
    }
}

/// The messages a distributed execution would exchange: exactly one utility
/// message per tree edge (child to parent) and one value message per tree
/// edge (parent to child).
#[derive(Debug, Clone, Serialize)]
pub enum DpopMessage {
    Util {
        from_var: String,
        to_var: String,
        from_owner: UserId,
        to_owner: UserId,
        separator: Vec<String>,
        table: Vec<Cost>,
    },
    Value {
        from_var: String,
        to_var: String,
        from_owner: UserId,
        to_owner: UserId,
        assignment: Vec<(String, i64)>,
    },
}

#[derive(Debug, Clone)]
pub struct DpopRun {
    pub solution: DcopSolution,
    pub messages: Vec<DpopMessage>,
}

struct UtilTable {
    /// Separator variable indices, ascending.
    separator: Vec<usize>,
    entries: Vec<Cost>,
}

/// Complete solver: utility propagation up the pseudo-tree, assignments
/// down. The returned cost is infinite when the hard constraints admit no
/// assignment.
pub fn solve_dpop(p: &DcopProblem, cfg: &DpopConfig) -> Result<DpopRun, DcopError> {
    let n = p.variables().len();
    if n == 0 {
        return Ok(DpopRun {
            solution: DcopSolution {
                assignment: BTreeMap::new(),
                cost: Cost::ZERO,
            },
            messages: Vec::new(),
        });
    }
    let tree = build_pseudo_tree(p);
    let dims: Vec<usize> = p.variables().iter().map(|v| v.domain.len()).collect();

    // Attach every constraint to its deepest scope variable in preorder.
    let position: Vec<usize> = {
        let mut pos = vec![0; n];
        for (i, v) in tree.order.iter().enumerate() {
            pos[*v] = i;
        }
        pos
    };
    let mut attached: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in p.constraints().iter().enumerate() {
        let deepest = c
            .scope
            .iter()
            .copied()
            .max_by_key(|v| position[*v])
            .unwrap_or(tree.roots[0]);
        attached[deepest].push(ci);
    }

    // Separators, bottom-up.
    let mut separators: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &v in tree.order.iter().rev() {
        let mut sep: BTreeSet<usize> = tree.pseudo_parents[v].iter().copied().collect();
        if let Some(parent) = tree.parent[v] {
            sep.insert(parent);
        }
        for ci in &attached[v] {
            for &s in &p.constraints()[*ci].scope {
                if s != v {
                    sep.insert(s);
                }
            }
        }
        let child_seps: Vec<usize> = tree.children[v]
            .iter()
            .flat_map(|c| separators[*c].iter().copied())
            .collect();
        sep.extend(child_seps);
        sep.remove(&v);
        separators[v] = sep;
    }

    // UTIL phase.
    let mut tables: Vec<Option<UtilTable>> = (0..n).map(|_| None).collect();
    let mut messages = Vec::new();
    for &v in tree.order.iter().rev() {
        let separator: Vec<usize> = separators[v].iter().copied().collect();
        let size: usize = separator.iter().map(|s| dims[*s]).product();
        if size > cfg.max_table_entries {
            return Err(DcopError::MemoryCap {
                var: p.variables()[v].id.clone(),
                entries: size,
                cap: cfg.max_table_entries,
            });
        }
        let mut entries = vec![Cost::Infinite; size];
        let mut ctx: BTreeMap<usize, usize> = BTreeMap::new();
        let mut sep_values = vec![0usize; separator.len()];
        loop {
            for (pos, var) in separator.iter().enumerate() {
                ctx.insert(*var, sep_values[pos]);
            }
            let mut best = Cost::Infinite;
            for val in 0..dims[v] {
                ctx.insert(v, val);
                best = best.min(local_cost(p, v, &attached[v], &tree, &tables, &ctx));
            }
            ctx.remove(&v);
            let idx = table_index(&separator, &sep_values, &dims);
            entries[idx] = best;
            if !increment(&mut sep_values, &sep_dims(&separator, &dims)) {
                break;
            }
        }
        if let Some(parent) = tree.parent[v] {
            messages.push(DpopMessage::Util {
                from_var: p.variables()[v].id.clone(),
                to_var: p.variables()[parent].id.clone(),
                from_owner: p.variables()[v].owner.clone(),
                to_owner: p.variables()[parent].owner.clone(),
                separator: separator.iter().map(|s| p.variables()[*s].id.clone()).collect(),
                table: entries.clone(),
            });
        }
        tables[v] = Some(UtilTable { separator, entries });
    }

    // VALUE phase, preorder: pick the smallest-index minimizer at each node.
    let mut assignment = vec![0usize; n];
    let mut total = Cost::ZERO;
    let mut ctx: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in &tree.order {
        let mut best = Cost::Infinite;
        let mut best_val = 0usize;
        for val in 0..dims[v] {
            ctx.insert(v, val);
            let cost = local_cost(p, v, &attached[v], &tree, &tables, &ctx);
            if cost.lt(&best) {
                best = cost;
                best_val = val;
            }
        }
        ctx.insert(v, best_val);
        assignment[v] = best_val;
        if tree.parent[v].is_none() {
            total = total + best;
        } else {
            let parent = tree.parent[v].expect("non-root");
            messages.push(DpopMessage::Value {
                from_var: p.variables()[parent].id.clone(),
                to_var: p.variables()[v].id.clone(),
                from_owner: p.variables()[parent].owner.clone(),
                to_owner: p.variables()[v].owner.clone(),
                // The child only needs its separator's values.
                assignment: separators[v]
                    .iter()
                    .map(|var| {
                        let record = &p.variables()[*var];
                        (record.id.clone(), record.domain[ctx[var]])
                    })
                    .collect(),
            });
        }
    }

    Ok(DpopRun {
        solution: DcopSolution {
            assignment: to_named(p, &assignment),
            cost: total,
        },
        messages,
    })
}

/// Cost, under `ctx`, of variable `v`'s attached constraints plus its
/// children's utility tables.
fn local_cost(
    p: &DcopProblem,
    v: usize,
    attached: &[usize],
    tree: &PseudoTree,
    tables: &[Option<UtilTable>],
    ctx: &BTreeMap<usize, usize>,
) -> Cost {
    let mut total = Cost::ZERO;
    for ci in attached {
        let c = &p.constraints()[*ci];
        let values: Vec<usize> = c.scope.iter().map(|s| ctx[s]).collect();
        total = total + c.evaluate(p, &values);
    }
    for child in &tree.children[v] {
        let table = tables[*child].as_ref().expect("children already processed");
        let values: Vec<usize> = table.separator.iter().map(|s| ctx[s]).collect();
        let dims: Vec<usize> = table
            .separator
            .iter()
            .map(|s| p.variables()[*s].domain.len())
            .collect();
        let mut idx = 0;
        for (d, val) in dims.iter().zip(&values) {
            idx = idx * d + val;
        }
        total = total + table.entries[idx];
    }
    total
}

fn sep_dims(separator: &[usize], dims: &[usize]) -> Vec<usize> {
    separator.iter().map(|s| dims[*s]).collect()
}

fn table_index(separator: &[usize], values: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0;
    for (s, val) in separator.iter().zip(values) {
        idx = idx * dims[*s] + val;
    }
    idx
}
