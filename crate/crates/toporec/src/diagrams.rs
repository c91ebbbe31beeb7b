//! Feynman-like graph enumeration and evaluation.
//!
//! The correlator recursions of this crate unroll into finite sums of nested
//! residues whose integrands are products of two-point functions. Each fully
//! unrolled term is a *diagram*: a rooted tree of residue vertices connected
//! by arrowed kernel edges, decorated with chain vertices (the sheet-hopping
//! structure of the fiber ratios), plain propagator edges to the external
//! leaves, and loop-closing plain edges (one per genus).
//!
//! Two dialects exist, mirroring the two engines:
//!
//! * **cubic** ([`Theory::Cubic`]) — vertices are residue-trivalent (one
//!   incoming arrow, one waved chain, one continuation); chains are sequences
//!   of colored-trivalent hops ending in a bivalent vertex. Every diagram has
//!   exactly `2h + k - 1` trivalent vertices and `h` loop-closing edges, with
//!   no symmetry factors.
//! * **effective** ([`Theory::Effective`]) — vertices are multivalent
//!   (valence `r + 2`, `1 ≤ r ≤ d2`, one marked fiber leg) and carry a block
//!   configuration from [`crate::partition`]; the canonical set enumeration
//!   absorbs the slot-ordering multiplicity, which is recorded on the diagram
//!   as [`Diagram::multiplicity`] (see [`crate::effective::omega_factor`]).
//!
//! Enumeration lists decorated topologies with abstract sheet labels in a
//! deterministic order; evaluation sums the concrete sheet indices over their
//! admissible ranges, innermost residues first, using the same series
//! machinery as the engines. Summing all diagrams of a cell reproduces the
//! engine value exactly — diagrams are a re-grouping of the recursion's
//! terms, not a separate numerical method.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex;

use crate::algebra::{Scalar, VarGen};
use crate::correlators::{combinations, split, CorrelatorValue, EvalConfig};
use crate::curve::{bergmann, third_kind, FiberData, SpectralCurve};
use crate::error::{AlgebraError, EvalError};
use crate::partition::{enumerate_configs, PartitionTerm};
use crate::Real;

/// Relative tolerance below which two evaluation points count as coincident.
const COINCIDENCE_RTOL: f64 = 1e-12;

/// Which vertex dialect a diagram belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theory {
    /// Residue-trivalent vertices with waved sheet chains.
    Cubic,
    /// Multivalent vertices carrying block configurations.
    Effective,
}

impl std::fmt::Display for Theory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Theory::Cubic => write!(f, "cubic"),
            Theory::Effective => write!(f, "effective"),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation AST
//
// A `Plan` describes how one correlator block is produced: either it is the
// bare two-point propagator (`Prop`, exactly one carried argument, genus 0)
// or it expands at a fresh residue vertex. Argument routing is stored as
// index selections into the parent's argument list, so evaluation can thread
// concrete scalars down the tree exactly the way the engines do.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Plan<T> {
    /// The block is `W₂(lead, args[0])` — a plain propagator edge.
    Prop,
    /// The block expands at a residue vertex of genus `genus`.
    Vertex { genus: usize, term: Box<T> },
}

/// One unrolled summand of the cubic recursion at a vertex.
#[derive(Debug, Clone)]
enum CubicTerm {
    /// A chain factor over the selected arguments paired with the
    /// physical-sheet continuation over the rest.
    Split { sel: Vec<usize>, chain: Chain, cont: Plan<CubicTerm> },
    /// The genus-reduction term: the chain absorbs the vertex's own
    /// physical-sheet point as a loop-closure argument.
    GenusLoop { chain: Chain },
}

/// One unrolled summand of the sheet-hopping chain.
#[derive(Debug, Clone)]
enum Chain {
    /// The chain jumps straight to the target sheet, ending in a bivalent
    /// vertex whose block carries all remaining points.
    Terminal { block: Plan<CubicTerm> },
    /// A colored-trivalent hop: a block leaves the chain at the hop sheet
    /// with the selected points; the chain continues with the rest.
    Step { sel: Vec<usize>, block: Plan<CubicTerm>, rest: Box<Chain> },
    /// A colored-trivalent hop that absorbs its own hop point as a
    /// loop-closure argument of the continued chain.
    LoopStep { rest: Box<Chain> },
}

/// One unrolled summand of the multi-valent recursion at a vertex.
#[derive(Debug, Clone)]
enum EffTerm {
    /// A block configuration over the selected arguments paired with the
    /// physical-sheet continuation over the rest.
    Split { sel: Vec<usize>, config: EffConfig, cont: Plan<EffTerm> },
    /// The genus-reduction term: the configuration absorbs the vertex's own
    /// physical-sheet point as a loop-closure argument.
    GenusLoop { config: EffConfig },
}

/// A block configuration with abstract slot placeholders `1..d2` and one
/// plan per block.
#[derive(Debug, Clone)]
struct EffConfig {
    shape: PartitionTerm,
    plans: Vec<Plan<EffTerm>>,
}

/// Root term of a diagram (the top vertex, whose genus is the diagram's `h`).
#[derive(Debug, Clone)]
enum RootTerm {
    Cubic(CubicTerm),
    Effective(EffTerm),
}

// ---------------------------------------------------------------------------
// Flattened graph view (export and invariant checks)
// ---------------------------------------------------------------------------

/// Vertex kinds appearing in flattened diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// A residue vertex of the cubic theory.
    ResidueTrivalent,
    /// A sheet-hopping chain vertex.
    ColoredTrivalent,
    /// A chain-terminating vertex.
    Bivalent,
    /// A residue vertex of the effective theory with `r` fiber legs
    /// (valence `r + 2`).
    Multivalent(usize),
}

impl std::fmt::Display for VertexKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VertexKind::ResidueTrivalent => write!(f, "residue-trivalent"),
            VertexKind::ColoredTrivalent => write!(f, "colored-trivalent"),
            VertexKind::Bivalent => write!(f, "bivalent"),
            VertexKind::Multivalent(r) => write!(f, "multivalent({r})"),
        }
    }
}

/// Edge kinds appearing in flattened diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// A third-kind kernel edge into a residue vertex.
    Arrowed,
    /// A waved kernel edge along a sheet chain.
    ArrowedWaved,
    /// A two-point propagator edge (leaf or loop closure).
    Plain,
}

impl std::fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeKind::Arrowed => write!(f, "arrowed"),
            EdgeKind::ArrowedWaved => write!(f, "arrowed-waved"),
            EdgeKind::Plain => write!(f, "plain"),
        }
    }
}

/// A node reference in a flattened diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    /// The external root point.
    Root,
    /// Internal vertex by id.
    Vertex(usize),
    /// External leaf `p_{n+1}`.
    Leaf(usize),
}

impl std::fmt::Display for NodeRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeRef::Root => write!(f, "root"),
            NodeRef::Vertex(n) => write!(f, "v{n}"),
            NodeRef::Leaf(n) => write!(f, "p{}", n + 1),
        }
    }
}

/// One internal vertex of a flattened diagram.
#[derive(Debug, Clone)]
pub struct DiagramVertex {
    /// Vertex id (referenced by edges as `NodeRef::Vertex`).
    pub id: usize,
    /// What the vertex contributes at evaluation.
    pub kind: VertexKind,
    /// Loop-closure slot hosted at this vertex, if any.
    pub slot: Option<usize>,
}

/// One edge of a flattened diagram.
#[derive(Debug, Clone)]
pub struct DiagramEdge {
    /// Source node.
    pub from: NodeRef,
    /// Target node.
    pub to: NodeRef,
    /// Edge decoration.
    pub kind: EdgeKind,
    /// Set when this plain edge closes the loop of the given slot.
    pub loop_slot: Option<usize>,
}

/// One decorated topology of the diagrammatic expansion of
/// `W_{k+1}^(h)(p; p₁…p_k)`.
pub struct Diagram {
    /// Vertex dialect.
    pub theory: Theory,
    /// Number of external leaves.
    pub k: usize,
    /// Number of loops.
    pub h: usize,
    /// Flattened vertices in discovery order.
    pub vertices: Vec<DiagramVertex>,
    /// Flattened edges (the first is always the root edge).
    pub edges: Vec<DiagramEdge>,
    /// Number of ordered slot wirings this canonical diagram represents
    /// (always 1 for the cubic theory).
    pub multiplicity: u64,
    root: RootTerm,
}

impl Diagram {
    /// Number of trivalent vertices (residue plus colored).
    pub fn trivalent_count(&self) -> usize {
        self.vertices
            .iter()
            .filter(|v| {
                matches!(v.kind, VertexKind::ResidueTrivalent | VertexKind::ColoredTrivalent)
            })
            .count()
    }

    /// Number of loop-closing plain edges.
    pub fn loop_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.loop_slot.is_some()).count()
    }

    /// True when the diagram contains a colored-trivalent (sheet-hopping)
    /// vertex; such diagrams evaluate to exactly zero on curves with a single
    /// non-physical sheet.
    pub fn has_colored_vertex(&self) -> bool {
        self.vertices.iter().any(|v| v.kind == VertexKind::ColoredTrivalent)
    }
}

/// Renders a diagram as structured text: one `field: value` header line per
/// scalar property, then one line per vertex and per edge with stable
/// `key=value` fields.
pub fn export(d: &Diagram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "theory: {}", d.theory);
    let _ = writeln!(out, "k: {}", d.k);
    let _ = writeln!(out, "h: {}", d.h);
    let _ = writeln!(out, "multiplicity: {}", d.multiplicity);
    for v in &d.vertices {
        let _ = write!(out, "vertex: id=v{} kind={}", v.id, v.kind);
        if let Some(s) = v.slot {
            let _ = write!(out, " slot=s{s}");
        }
        out.push('\n');
    }
    for e in &d.edges {
        let _ = write!(out, "edge: from={} to={} type={}", e.from, e.to, e.kind);
        if let Some(s) = e.loop_slot {
            let _ = write!(out, " loop=s{s}");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

/// Enumerates every diagram of `W_{k+1}^(h)` (`k` leaves, `h` loops) in a
/// deterministic order. `d2` is only consulted by the effective theory,
/// whose vertex configurations depend on the number of non-physical sheets;
/// cubic topologies are d2-independent (sheet ranges are summed at
/// evaluation and may be empty). Cells with `k + 2h < 2` have no diagrams:
/// the one- and two-point planar functions are a zero and a bare propagator.
pub fn enumerate(k: usize, h: usize, theory: Theory, d2: usize) -> Vec<Diagram> {
    if k + 2 * h < 2 {
        return Vec::new();
    }
    match theory {
        Theory::Cubic => cubic_terms(k, h)
            .into_iter()
            .map(|t| flatten(k, h, Theory::Cubic, RootTerm::Cubic(t)))
            .collect(),
        Theory::Effective => eff_terms(k, h, d2)
            .into_iter()
            .map(|t| flatten(k, h, Theory::Effective, RootTerm::Effective(t)))
            .collect(),
    }
}

/// All block plans for a correlator with `nargs` carried arguments and the
/// given genus (cubic dialect).
fn cubic_plans(nargs: usize, genus: usize) -> Vec<Plan<CubicTerm>> {
    debug_assert!(nargs + genus > 0, "blocks are never the empty planar one-point function");
    if nargs == 1 && genus == 0 {
        return vec![Plan::Prop];
    }
    cubic_terms(nargs, genus)
        .into_iter()
        .map(|t| Plan::Vertex { genus, term: Box::new(t) })
        .collect()
}

/// All vertex summands for a cubic vertex with `kc` carried arguments and
/// genus `h`.
fn cubic_terms(kc: usize, h: usize) -> Vec<CubicTerm> {
    let mut out = Vec::new();
    for m in 0..=h {
        for j in 0..=kc {
            if (m == 0 && j == 0) || (m == h && j == kc) {
                continue;
            }
            for sel in combinations(kc, j) {
                for chain in chains(j, m) {
                    for cont in cubic_plans(kc - j, h - m) {
                        out.push(CubicTerm::Split {
                            sel: sel.clone(),
                            chain: chain.clone(),
                            cont,
                        });
                    }
                }
            }
        }
    }
    if h >= 1 {
        for chain in chains(kc + 1, h - 1) {
            out.push(CubicTerm::GenusLoop { chain });
        }
    }
    out
}

/// All chain summands over `npts` carried points at genus `g`.
fn chains(npts: usize, g: usize) -> Vec<Chain> {
    debug_assert!(npts + g > 0, "empty chains terminate at the recursion base, not here");
    let mut out = Vec::new();
    for block in cubic_plans(npts, g) {
        out.push(Chain::Terminal { block });
    }
    for m in 0..=g {
        for j in 0..=npts {
            if (m == 0 && j == 0) || (m == g && j == npts) {
                continue;
            }
            for sel in combinations(npts, j) {
                for block in cubic_plans(j, m) {
                    for rest in chains(npts - j, g - m) {
                        out.push(Chain::Step {
                            sel: sel.clone(),
                            block: block.clone(),
                            rest: Box::new(rest),
                        });
                    }
                }
            }
        }
    }
    if g >= 1 {
        for rest in chains(npts + 1, g - 1) {
            out.push(Chain::LoopStep { rest: Box::new(rest) });
        }
    }
    out
}

/// All block plans for the effective dialect.
fn eff_plans(nargs: usize, genus: usize, d2: usize) -> Vec<Plan<EffTerm>> {
    debug_assert!(nargs + genus > 0);
    if nargs == 1 && genus == 0 {
        return vec![Plan::Prop];
    }
    eff_terms(nargs, genus, d2)
        .into_iter()
        .map(|t| Plan::Vertex { genus, term: Box::new(t) })
        .collect()
}

/// All vertex summands for an effective vertex with `kc` carried arguments
/// and genus `h` on a curve with `d2` non-physical sheets.
fn eff_terms(kc: usize, h: usize, d2: usize) -> Vec<EffTerm> {
    let mut out = Vec::new();
    for m in 0..=h {
        for j in 0..=kc {
            if (m == 0 && j == 0) || (m == h && j == kc) {
                continue;
            }
            for sel in combinations(kc, j) {
                for config in eff_configs(j, m, d2) {
                    for cont in eff_plans(kc - j, h - m, d2) {
                        out.push(EffTerm::Split {
                            sel: sel.clone(),
                            config: config.clone(),
                            cont,
                        });
                    }
                }
            }
        }
    }
    if h >= 1 {
        for config in eff_configs(kc + 1, h - 1, d2) {
            out.push(EffTerm::GenusLoop { config });
        }
    }
    out
}

/// All decorated block configurations over `npts` points with genus budget
/// `extra`, slots drawn from `d2 - 1` abstract placeholders.
fn eff_configs(npts: usize, extra: usize, d2: usize) -> Vec<EffConfig> {
    let pool: Vec<usize> = (1..d2).collect();
    let mut out = Vec::new();
    for shape in enumerate_configs(npts, &pool, extra) {
        // Each block independently picks an expansion plan.
        let choices: Vec<Vec<Plan<EffTerm>>> = shape
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| eff_plans(b.order(bi == 0), b.genus, d2))
            .collect();
        let mut stack: Vec<Vec<Plan<EffTerm>>> = vec![Vec::new()];
        for options in &choices {
            let mut next = Vec::with_capacity(stack.len() * options.len());
            for partial in &stack {
                for opt in options {
                    let mut grown = partial.clone();
                    grown.push(opt.clone());
                    next.push(grown);
                }
            }
            stack = next;
        }
        for plans in stack {
            out.push(EffConfig { shape: shape.clone(), plans });
        }
    }
    out
}

/// The number of diagrams of the two-sheet (single non-physical sheet)
/// theory at `k` leaves and `h` loops: the conjugate-split recursion unrolls
/// with one product term per ordered pair of sub-blocks plus one
/// genus-reduction term, and no sheet chains. Cubic diagrams without colored
/// vertices are in bijection with these.
pub fn onematrix_count(k: usize, h: usize) -> u64 {
    fn plan_count(n: usize, g: usize) -> u64 {
        if n == 1 && g == 0 {
            1
        } else {
            vertex_count(n, g)
        }
    }
    fn vertex_count(kc: usize, h: usize) -> u64 {
        let mut total = 0u64;
        for m in 0..=h {
            for j in 0..=kc {
                if (m == 0 && j == 0) || (m == h && j == kc) {
                    continue;
                }
                let binom = combinations(kc, j).len() as u64;
                total += binom * plan_count(j, m) * plan_count(kc - j, h - m);
            }
        }
        if h >= 1 {
            total += plan_count(kc + 1, h - 1);
        }
        total
    }
    if k + 2 * h < 2 {
        return 0;
    }
    vertex_count(k, h)
}

// ---------------------------------------------------------------------------
// Flattening (abstract walk producing the vertex/edge lists)
// ---------------------------------------------------------------------------

/// Abstract argument carried through the flattening walk.
#[derive(Debug, Clone, Copy)]
enum AArg {
    /// External leaf index.
    Ext(usize),
    /// Loop-closure slot id (origin vertex recorded separately).
    Slot(usize),
    /// A fiber leg of the given vertex (effective blocks only).
    Fiber(usize),
}

struct Flattener {
    vertices: Vec<DiagramVertex>,
    edges: Vec<DiagramEdge>,
    slot_origin: Vec<usize>,
    multiplicity: u64,
}

impl Flattener {
    fn new_vertex(&mut self, kind: VertexKind) -> usize {
        let id = self.vertices.len() + 1;
        self.vertices.push(DiagramVertex { id, kind, slot: None });
        id
    }

    fn new_slot(&mut self, origin: usize) -> usize {
        let slot = self.slot_origin.len() + 1;
        self.slot_origin.push(origin);
        let v = self
            .vertices
            .iter_mut()
            .find(|v| v.id == origin)
            .expect("slot origin exists");
        debug_assert!(v.slot.is_none(), "one slot per vertex in these expansions");
        v.slot = Some(slot);
        slot
    }

    fn edge(&mut self, from: NodeRef, to: NodeRef, kind: EdgeKind, loop_slot: Option<usize>) {
        self.edges.push(DiagramEdge { from, to, kind, loop_slot });
    }

    fn arg_target(&self, arg: AArg) -> (NodeRef, Option<usize>) {
        match arg {
            AArg::Ext(e) => (NodeRef::Leaf(e), None),
            AArg::Slot(s) => (NodeRef::Vertex(self.slot_origin[s - 1]), Some(s)),
            AArg::Fiber(v) => (NodeRef::Vertex(v), None),
        }
    }

    fn plan_cubic(&mut self, plan: &Plan<CubicTerm>, source: NodeRef, args: &[AArg]) {
        match plan {
            Plan::Prop => {
                debug_assert_eq!(args.len(), 1);
                let (to, loop_slot) = self.arg_target(args[0]);
                self.edge(source, to, EdgeKind::Plain, loop_slot);
            }
            Plan::Vertex { term, .. } => {
                let v = self.new_vertex(VertexKind::ResidueTrivalent);
                self.edge(source, NodeRef::Vertex(v), EdgeKind::Arrowed, None);
                self.term_cubic(term, v, args);
            }
        }
    }

    fn term_cubic(&mut self, term: &CubicTerm, v: usize, args: &[AArg]) {
        match term {
            CubicTerm::Split { sel, chain, cont } => {
                let (chain_args, cont_args) = split(args, sel);
                self.chain_cubic(chain, NodeRef::Vertex(v), &chain_args);
                self.plan_cubic(cont, NodeRef::Vertex(v), &cont_args);
            }
            CubicTerm::GenusLoop { chain } => {
                let slot = self.new_slot(v);
                let mut pts = vec![AArg::Slot(slot)];
                pts.extend_from_slice(args);
                self.chain_cubic(chain, NodeRef::Vertex(v), &pts);
            }
        }
    }

    fn chain_cubic(&mut self, chain: &Chain, source: NodeRef, pts: &[AArg]) {
        match chain {
            Chain::Terminal { block } => {
                let b = self.new_vertex(VertexKind::Bivalent);
                self.edge(source, NodeRef::Vertex(b), EdgeKind::ArrowedWaved, None);
                self.plan_cubic(block, NodeRef::Vertex(b), pts);
            }
            Chain::Step { sel, block, rest } => {
                let c = self.new_vertex(VertexKind::ColoredTrivalent);
                self.edge(source, NodeRef::Vertex(c), EdgeKind::ArrowedWaved, None);
                let (block_args, rest_args) = split(pts, sel);
                self.plan_cubic(block, NodeRef::Vertex(c), &block_args);
                self.chain_cubic(rest, NodeRef::Vertex(c), &rest_args);
            }
            Chain::LoopStep { rest } => {
                let c = self.new_vertex(VertexKind::ColoredTrivalent);
                self.edge(source, NodeRef::Vertex(c), EdgeKind::ArrowedWaved, None);
                let slot = self.new_slot(c);
                let mut next = vec![AArg::Slot(slot)];
                next.extend_from_slice(pts);
                self.chain_cubic(rest, NodeRef::Vertex(c), &next);
            }
        }
    }

    fn plan_eff(&mut self, plan: &Plan<EffTerm>, source: NodeRef, args: &[AArg]) {
        match plan {
            Plan::Prop => {
                debug_assert_eq!(args.len(), 1);
                let (to, loop_slot) = self.arg_target(args[0]);
                self.edge(source, to, EdgeKind::Plain, loop_slot);
            }
            Plan::Vertex { term, .. } => {
                let (config, split_part) = match term.as_ref() {
                    EffTerm::Split { sel, config, cont } => {
                        (config, Some((sel.clone(), cont.clone())))
                    }
                    EffTerm::GenusLoop { config } => (config, None),
                };
                let legs = 1 + config
                    .shape
                    .blocks
                    .iter()
                    .map(|b| b.slots.len())
                    .sum::<usize>();
                let v = self.new_vertex(VertexKind::Multivalent(legs));
                self.edge(source, NodeRef::Vertex(v), EdgeKind::Arrowed, None);
                self.multiplicity *= crate::effective::omega_factor(&config.shape);
                match split_part {
                    Some((sel, cont)) => {
                        let (config_args, cont_args) = split(args, &sel);
                        self.config_eff(config, v, &config_args);
                        self.plan_eff(&cont, NodeRef::Vertex(v), &cont_args);
                    }
                    None => {
                        let slot = self.new_slot(v);
                        let mut pts = vec![AArg::Slot(slot)];
                        pts.extend_from_slice(args);
                        self.config_eff(config, v, &pts);
                    }
                }
            }
        }
    }

    fn config_eff(&mut self, config: &EffConfig, v: usize, pts: &[AArg]) {
        for (bi, (shape, plan)) in config.shape.blocks.iter().zip(&config.plans).enumerate() {
            let tail = if bi == 0 { &shape.slots[..] } else { &shape.slots[1..] };
            let mut args: Vec<AArg> = shape.exts.iter().map(|&x| pts[x]).collect();
            args.extend(tail.iter().map(|_| AArg::Fiber(v)));
            self.plan_eff(plan, NodeRef::Vertex(v), &args);
        }
    }
}

/// Builds the flattened graph for a root term.
fn flatten(k: usize, h: usize, theory: Theory, root: RootTerm) -> Diagram {
    let mut fl = Flattener {
        vertices: Vec::new(),
        edges: Vec::new(),
        slot_origin: Vec::new(),
        multiplicity: 1,
    };
    let args: Vec<AArg> = (0..k).map(AArg::Ext).collect();
    match &root {
        RootTerm::Cubic(term) => {
            let v = fl.new_vertex(VertexKind::ResidueTrivalent);
            fl.edge(NodeRef::Root, NodeRef::Vertex(v), EdgeKind::Arrowed, None);
            fl.term_cubic(term, v, &args);
        }
        RootTerm::Effective(term) => {
            // Reuse the plan walker so the root multivalent vertex gets the
            // same decorations as nested ones; the walker emits the root
            // arrowed edge.
            let plan = Plan::Vertex { genus: h, term: Box::new(term.clone()) };
            fl.plan_eff(&plan, NodeRef::Root, &args);
        }
    }
    Diagram {
        theory,
        k,
        h,
        vertices: fl.vertices,
        edges: fl.edges,
        multiplicity: fl.multiplicity,
        root,
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Evaluates diagrams on a curve, sharing fiber series across calls.
pub struct DiagramEvaluator<'c, F: Real> {
    curve: &'c SpectralCurve<F>,
    cfg: EvalConfig<F>,
    vars: VarGen,
    mult: Cell<usize>,
    fibers: RefCell<HashMap<(usize, usize), FiberData<F>>>,
}

impl<'c, F: Real> DiagramEvaluator<'c, F> {
    /// Creates an evaluator for `curve` with configuration `cfg`.
    pub fn new(curve: &'c SpectralCurve<F>, cfg: EvalConfig<F>) -> Self {
        DiagramEvaluator {
            curve,
            cfg,
            vars: VarGen::new(),
            mult: Cell::new(1),
            fibers: RefCell::new(HashMap::new()),
        }
    }

    /// The evaluator's configuration.
    pub fn config(&self) -> &EvalConfig<F> {
        &self.cfg
    }

    /// The curve diagrams are evaluated on.
    pub fn curve(&self) -> &SpectralCurve<F> {
        self.curve
    }

    fn call_order(&self, nargs: usize, genus: usize) -> usize {
        self.cfg.order.max(6 * genus + 2 * (nargs + 1) + 8) * self.mult.get()
    }

    fn with_retries<T>(
        &self,
        nargs: usize,
        genus: usize,
        body: impl Fn(&Self) -> Result<T, EvalError>,
    ) -> Result<(T, u32), EvalError> {
        for attempt in 0..=self.cfg.max_retries {
            self.mult.set(1usize << attempt);
            self.fibers.borrow_mut().clear();
            match body(self) {
                Ok(v) => return Ok((v, attempt)),
                Err(e) if e.is_retryable() && attempt < self.cfg.max_retries => continue,
                Err(e) if e.is_retryable() => {
                    return Err(EvalError::TruncationExhausted {
                        retries: self.cfg.max_retries,
                        order: self.call_order(nargs, genus),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("retry loop always returns");
    }

    fn validate_points(&self, points: &[Complex<F>]) -> Result<(), EvalError> {
        for &z in points {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(EvalError::CoincidentPoints(format!("non-finite point {z}")));
            }
            self.curve.guard_point(z)?;
            let tol = F::from(COINCIDENCE_RTOL).unwrap() * (F::one() + z.norm());
            if (z - self.cfg.basepoint).norm() <= tol {
                return Err(EvalError::BasepointCollision {
                    point: format!("{}", self.cfg.basepoint),
                    what: format!("evaluation point {z}"),
                });
            }
        }
        for (n, &p) in points.iter().enumerate() {
            for &q in points.iter().skip(n + 1) {
                let tol = F::from(COINCIDENCE_RTOL).unwrap() * (F::one() + p.norm());
                if (p - q).norm() <= tol {
                    return Err(EvalError::CoincidentPoints(format!("{p} appears twice")));
                }
            }
        }
        Ok(())
    }

    fn fiber(&self, s: usize, order: usize) -> Result<FiberData<F>, EvalError> {
        if let Some(fb) = self.fibers.borrow().get(&(s, order)) {
            return Ok(fb.retag(self.vars.fresh()));
        }
        let fb = self.curve.fiber_series(s, order, &self.vars)?;
        let out = fb.retag(self.vars.fresh());
        self.fibers.borrow_mut().insert((s, order), fb);
        Ok(out)
    }

    /// Evaluates one diagram at `points = [p, p₁, …, p_k]` (root point
    /// first).
    pub fn evaluate(
        &self,
        d: &Diagram,
        points: &[Complex<F>],
    ) -> Result<CorrelatorValue<F>, EvalError> {
        assert_eq!(points.len(), d.k + 1, "need the root point plus k leaves");
        self.validate_points(points)?;
        let scalars: Vec<Scalar<F>> = points.iter().map(|&p| Scalar::from_c(p)).collect();
        let lead = &scalars[0];
        let args = &scalars[1..];
        let (value, retries) = self.with_retries(d.k, d.h, |eng| {
            let v = match &d.root {
                RootTerm::Cubic(term) => eng.eval_cubic_vertex(d.h, lead, args, term)?,
                RootTerm::Effective(term) => eng.eval_eff_vertex(d.h, lead, args, term)?,
            };
            v.level0()
                .filter(|c| c.re.is_finite() && c.im.is_finite())
                .ok_or(EvalError::Algebra(AlgebraError::NonFinite))
        })?;
        Ok(CorrelatorValue { value, order_used: self.call_order(d.k, d.h), retries })
    }

    /// Sums all diagrams of the cell over the same points. For `k = 1, h = 0`
    /// the two-point function is the bare propagator and is returned
    /// directly.
    pub fn diagram_sum(
        &self,
        k: usize,
        h: usize,
        theory: Theory,
        points: &[Complex<F>],
    ) -> Result<CorrelatorValue<F>, EvalError> {
        assert_eq!(points.len(), k + 1, "need the root point plus k leaves");
        if k == 1 && h == 0 {
            self.validate_points(points)?;
            let d = points[0] - points[1];
            return Ok(CorrelatorValue {
                value: Complex::new(F::one(), F::zero()) / (d * d),
                order_used: 0,
                retries: 0,
            });
        }
        let mut total = Complex::new(F::zero(), F::zero());
        let mut order_used = 0;
        let mut retries = 0;
        for d in enumerate(k, h, theory, self.curve.d2()) {
            let v = self.evaluate(&d, points)?;
            total = total + v.value;
            order_used = order_used.max(v.order_used);
            retries = retries.max(v.retries);
        }
        Ok(CorrelatorValue { value: total, order_used, retries })
    }

    fn eval_cubic_plan(
        &self,
        plan: &Plan<CubicTerm>,
        lead: &Scalar<F>,
        args: &[Scalar<F>],
    ) -> Result<Scalar<F>, EvalError> {
        match plan {
            Plan::Prop => {
                debug_assert_eq!(args.len(), 1);
                Ok(bergmann(lead, &args[0])?)
            }
            Plan::Vertex { genus, term } => self.eval_cubic_vertex(*genus, lead, args, term),
        }
    }

    fn eval_cubic_vertex(
        &self,
        genus: usize,
        lead: &Scalar<F>,
        args: &[Scalar<F>],
        term: &CubicTerm,
    ) -> Result<Scalar<F>, EvalError> {
        let order = self.call_order(args.len(), genus);
        let o = Scalar::from_c(self.cfg.basepoint);
        let d2 = self.curve.d2();
        let mut total = Scalar::zero();
        for s in 0..self.curve.branch_points().len() {
            let fb = self.fiber(s, order)?;
            let ds = third_kind(lead, &fb.zeta[0], &o)?;
            let inner = match term {
                CubicTerm::Split { sel, chain, cont } => {
                    let (zj, zrest) = split(args, sel);
                    let cont_val = self.eval_cubic_plan(cont, &fb.zeta[0], &zrest)?;
                    if cont_val.is_c_zero() {
                        continue;
                    }
                    let mut chain_sum = Scalar::zero();
                    for i in 1..=d2 {
                        chain_sum =
                            chain_sum.add(&self.eval_chain(chain, &fb, 1, 0, i, &zj)?);
                    }
                    chain_sum.mul(&cont_val)
                }
                CubicTerm::GenusLoop { chain } => {
                    let mut pts = Vec::with_capacity(args.len() + 1);
                    pts.push(fb.zeta[0].clone());
                    pts.extend(args.iter().cloned());
                    let mut chain_sum = Scalar::zero();
                    for i in 1..=d2 {
                        chain_sum =
                            chain_sum.add(&self.eval_chain(chain, &fb, 1, 0, i, &pts)?);
                    }
                    chain_sum
                }
            };
            if inner.is_c_zero() {
                continue;
            }
            total = total.add(&inner.mul(&ds).residue(fb.var)?);
        }
        Ok(total)
    }

    fn eval_chain(
        &self,
        chain: &Chain,
        fb: &FiberData<F>,
        used: u64,
        a: usize,
        i: usize,
        pts: &[Scalar<F>],
    ) -> Result<Scalar<F>, EvalError> {
        let d2 = self.curve.d2();
        let denom = fb.y[i].sub(&fb.y[a]);
        match chain {
            Chain::Terminal { block } => {
                let v = self.eval_cubic_plan(block, &fb.zeta[i], pts)?;
                if v.is_c_zero() {
                    return Ok(Scalar::zero());
                }
                Ok(v.div(&fb.xp[i])?.div(&denom)?)
            }
            Chain::Step { sel, block, rest } => {
                let (zj, zrest) = split(pts, sel);
                let mut acc = Scalar::zero();
                for l in 1..=d2 {
                    if used & (1 << l) != 0 || l == i {
                        continue;
                    }
                    let b = self.eval_cubic_plan(block, &fb.zeta[l], &zj)?;
                    if b.is_c_zero() {
                        continue;
                    }
                    let r = self.eval_chain(rest, fb, used | (1 << l), l, i, &zrest)?;
                    if r.is_c_zero() {
                        continue;
                    }
                    acc = acc.add(&b.mul(&r).div(&fb.xp[l])?);
                }
                if acc.is_c_zero() {
                    return Ok(Scalar::zero());
                }
                Ok(acc.div(&denom)?)
            }
            Chain::LoopStep { rest } => {
                let mut acc = Scalar::zero();
                for l in 1..=d2 {
                    if used & (1 << l) != 0 || l == i {
                        continue;
                    }
                    let mut next = Vec::with_capacity(pts.len() + 1);
                    next.push(fb.zeta[l].clone());
                    next.extend(pts.iter().cloned());
                    let r = self.eval_chain(rest, fb, used | (1 << l), l, i, &next)?;
                    if r.is_c_zero() {
                        continue;
                    }
                    acc = acc.add(&r.div(&fb.xp[l])?);
                }
                if acc.is_c_zero() {
                    return Ok(Scalar::zero());
                }
                Ok(acc.div(&denom)?)
            }
        }
    }

    fn eval_eff_plan(
        &self,
        plan: &Plan<EffTerm>,
        lead: &Scalar<F>,
        args: &[Scalar<F>],
    ) -> Result<Scalar<F>, EvalError> {
        match plan {
            Plan::Prop => {
                debug_assert_eq!(args.len(), 1);
                Ok(bergmann(lead, &args[0])?)
            }
            Plan::Vertex { genus, term } => self.eval_eff_vertex(*genus, lead, args, term),
        }
    }

    fn eval_eff_vertex(
        &self,
        genus: usize,
        lead: &Scalar<F>,
        args: &[Scalar<F>],
        term: &EffTerm,
    ) -> Result<Scalar<F>, EvalError> {
        let order = self.call_order(args.len(), genus);
        let o = Scalar::from_c(self.cfg.basepoint);
        let d2 = self.curve.d2();
        let mut total = Scalar::zero();
        for s in 0..self.curve.branch_points().len() {
            let fb = self.fiber(s, order)?;
            let ds = third_kind(lead, &fb.zeta[0], &o)?;
            let inner = match term {
                EffTerm::Split { sel, config, cont } => {
                    let (zj, zrest) = split(args, sel);
                    let cont_val = self.eval_eff_plan(cont, &fb.zeta[0], &zrest)?;
                    if cont_val.is_c_zero() {
                        continue;
                    }
                    let mut s_sum = Scalar::zero();
                    for e in 1..=d2 {
                        let c = self.eval_config(config, &fb, e, &zj)?;
                        if c.is_c_zero() {
                            continue;
                        }
                        s_sum = s_sum.add(&c.div(&fb.y[e].sub(&fb.y[0]))?);
                    }
                    s_sum.mul(&cont_val)
                }
                EffTerm::GenusLoop { config } => {
                    let mut pts = Vec::with_capacity(args.len() + 1);
                    pts.push(fb.zeta[0].clone());
                    pts.extend(args.iter().cloned());
                    let mut s_sum = Scalar::zero();
                    for e in 1..=d2 {
                        let c = self.eval_config(config, &fb, e, &pts)?;
                        if c.is_c_zero() {
                            continue;
                        }
                        s_sum = s_sum.add(&c.div(&fb.y[e].sub(&fb.y[0]))?);
                    }
                    s_sum
                }
            };
            if inner.is_c_zero() {
                continue;
            }
            total = total.add(&inner.mul(&ds).residue(fb.var)?);
        }
        Ok(total)
    }

    /// Evaluates one block configuration at marked sheet `e`: abstract slot
    /// placeholders map order-preservingly onto the concrete pool
    /// `{1..d2}∖{e}`.
    fn eval_config(
        &self,
        config: &EffConfig,
        fb: &FiberData<F>,
        e: usize,
        pts: &[Scalar<F>],
    ) -> Result<Scalar<F>, EvalError> {
        let d2 = self.curve.d2();
        let pool: Vec<usize> = (1..=d2).filter(|&s| s != e).collect();
        let concrete = |slot: usize| pool[slot - 1];
        let mut prod = Scalar::one();
        for (bi, (shape, plan)) in config.shape.blocks.iter().zip(&config.plans).enumerate() {
            let (lead_sheet, tail) = if bi == 0 {
                (e, &shape.slots[..])
            } else {
                (concrete(shape.slots[0]), &shape.slots[1..])
            };
            let mut wargs: Vec<Scalar<F>> =
                shape.exts.iter().map(|&x| pts[x].clone()).collect();
            wargs.extend(tail.iter().map(|&sl| fb.zeta[concrete(sl)].clone()));
            let v = self.eval_eff_plan(plan, &fb.zeta[lead_sheet], &wargs)?;
            if v.is_c_zero() {
                return Ok(Scalar::zero());
            }
            prod = prod.mul(&v).div(&fb.xp[lead_sheet])?;
            for &sl in tail {
                prod = prod.div(&fb.xp[concrete(sl)])?;
            }
        }
        for shape in &config.shape.blocks {
            for &sl in &shape.slots {
                prod = prod.div(&fb.y[e].sub(&fb.y[concrete(sl)]))?;
            }
        }
        Ok(prod)
    }
}
