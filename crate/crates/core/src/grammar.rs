//! Robot grammar: symbols, structural rules, derivations and the
//! brute-force enumeration used as a test oracle.
//!
//! A design is a linear chain of symbols (the spine). Rule `r3` attaches a
//! parenthesized `C-M-E` group to the `U` node it creates; that group is a
//! branch and is itself a chain that later rules may rewrite.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node symbols of the robot graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    /// Start symbol.
    S,
    /// Head part.
    H,
    /// Body joint.
    Y,
    /// Body part (pending body slot).
    B,
    /// Tail part.
    T,
    /// Body link.
    U,
    /// Connector.
    C,
    /// Mount part.
    M,
    /// Limb end.
    E,
    /// Limb joint.
    J,
    /// Limb link.
    L,
}

impl Symbol {
    pub const ALL: [Symbol; 11] = [
        Symbol::S,
        Symbol::H,
        Symbol::Y,
        Symbol::B,
        Symbol::T,
        Symbol::U,
        Symbol::C,
        Symbol::M,
        Symbol::E,
        Symbol::J,
        Symbol::L,
    ];

    pub fn as_char(self) -> char {
        match self {
            Symbol::S => 'S',
            Symbol::H => 'H',
            Symbol::Y => 'Y',
            Symbol::B => 'B',
            Symbol::T => 'T',
            Symbol::U => 'U',
            Symbol::C => 'C',
            Symbol::M => 'M',
            Symbol::E => 'E',
            Symbol::J => 'J',
            Symbol::L => 'L',
        }
    }

    pub fn from_char(c: char) -> Option<Symbol> {
        Symbol::ALL.into_iter().find(|s| s.as_char() == c)
    }

    /// Symbols that still need a structural rule before the design is complete.
    pub fn is_nonterminal(self) -> bool {
        matches!(self, Symbol::S | Symbol::B)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub symbol: Symbol,
    /// Appendage chains attached at this node.
    pub branches: Vec<DesignGraph>,
}

impl Node {
    pub fn leaf(symbol: Symbol) -> Self {
        Node {
            symbol,
            branches: Vec::new(),
        }
    }
}

/// A derivation product: a non-empty chain of nodes, each of which may carry
/// branch chains.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DesignGraph {
    spine: Vec<Node>,
}

/// Location of a node: the sequence of `(spine index, branch index)` descents
/// followed by the index inside the innermost chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeAddress {
    pub path: Vec<(usize, usize)>,
    pub index: usize,
}

impl NodeAddress {
    pub fn root() -> Self {
        NodeAddress::spine(0)
    }

    pub fn spine(index: usize) -> Self {
        NodeAddress {
            path: Vec::new(),
            index,
        }
    }

    /// Address of node `index` inside branch `branch` of this node.
    pub fn child(&self, branch: usize, index: usize) -> Self {
        let mut path = self.path.clone();
        path.push((self.index, branch));
        NodeAddress { path, index }
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    /// Underscore-joined key used for generated names (`1_0_2`).
    pub fn key(&self) -> String {
        let mut parts: Vec<String> = Vec::with_capacity(self.path.len() * 2 + 1);
        for (s, b) in &self.path {
            parts.push(s.to_string());
            parts.push(b.to_string());
        }
        parts.push(self.index.to_string());
        parts.join("_")
    }

    /// Where this address ends up after the node at `site` is replaced by a
    /// chain of `rhs_len` nodes. `None` when the address is the replaced node
    /// or lies inside its (discarded) branches.
    pub fn after_replacement(&self, site: &NodeAddress, rhs_len: usize) -> Option<NodeAddress> {
        self.shifted(site, rhs_len as isize - 1, true)
    }

    /// Inverse of [`after_replacement`](Self::after_replacement) for a chain
    /// of `removed + 1` nodes starting at `site` collapsing to one node.
    pub fn after_collapse(&self, site: &NodeAddress, removed: usize) -> Option<NodeAddress> {
        // Nodes site.index .. site.index + removed disappear; the node that
        // followed them takes site.index.
        let depth = site.path.len();
        if self.path.len() < depth || self.path[..depth] != site.path[..] {
            return Some(self.clone());
        }
        let idx = if self.path.len() == depth {
            self.index
        } else {
            self.path[depth].0
        };
        if idx < site.index {
            return Some(self.clone());
        }
        if idx < site.index + removed {
            return None;
        }
        let mut out = self.clone();
        if self.path.len() == depth {
            out.index -= removed;
        } else {
            out.path[depth].0 -= removed;
        }
        Some(out)
    }

    fn shifted(&self, site: &NodeAddress, delta: isize, drop_site: bool) -> Option<NodeAddress> {
        let depth = site.path.len();
        if self.path.len() < depth || self.path[..depth] != site.path[..] {
            return Some(self.clone());
        }
        let idx = if self.path.len() == depth {
            self.index
        } else {
            self.path[depth].0
        };
        if idx < site.index {
            return Some(self.clone());
        }
        if idx == site.index && drop_site {
            return None;
        }
        let mut out = self.clone();
        let moved = (idx as isize + delta) as usize;
        if self.path.len() == depth {
            out.index = moved;
        } else {
            out.path[depth].0 = moved;
        }
        Some(out)
    }
}

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, b) in &self.path {
            write!(f, "{s}:{b}/")?;
        }
        write!(f, "{}", self.index)
    }
}

impl FromStr for NodeAddress {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GrammarError::BadAddress(s.to_string());
        let mut parts: Vec<&str> = s.split('/').collect();
        let last = parts.pop().ok_or_else(bad)?;
        let index = last.trim().parse().map_err(|_| bad())?;
        let mut path = Vec::with_capacity(parts.len());
        for p in parts {
            let (a, b) = p.split_once(':').ok_or_else(bad)?;
            path.push((
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ));
        }
        Ok(NodeAddress { path, index })
    }
}

impl Serialize for NodeAddress {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeAddress {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("no node at address {0}")]
    SiteNotFound(NodeAddress),
    #[error("rule {rule} expects {expected} but node {site} is {found}")]
    SymbolMismatch {
        rule: Rule,
        site: NodeAddress,
        expected: Symbol,
        found: Symbol,
    },
    #[error("start rule r0 can only open a derivation")]
    StartRuleMisplaced,
    #[error("no node matches the left-hand side of {0}")]
    NoSite(Rule),
    #[error("malformed node address `{0}`")]
    BadAddress(String),
    #[error("malformed graph `{text}`: {reason}")]
    BadGraph { text: String, reason: String },
}

/// The eight structural rules. `R0` only ever opens a derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    R0,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
}

impl Rule {
    pub const ALL: [Rule; 8] = [
        Rule::R0,
        Rule::R1,
        Rule::R2,
        Rule::R3,
        Rule::R4,
        Rule::R5,
        Rule::R6,
        Rule::R7,
    ];

    /// Rules that rewrite an existing node.
    pub const REWRITES: [Rule; 7] = [
        Rule::R1,
        Rule::R2,
        Rule::R3,
        Rule::R4,
        Rule::R5,
        Rule::R6,
        Rule::R7,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Rule::R0 => "r0",
            Rule::R1 => "r1",
            Rule::R2 => "r2",
            Rule::R3 => "r3",
            Rule::R4 => "r4",
            Rule::R5 => "r5",
            Rule::R6 => "r6",
            Rule::R7 => "r7",
        }
    }

    pub fn from_id(id: &str) -> Option<Rule> {
        Rule::ALL
            .into_iter()
            .find(|r| r.id().eq_ignore_ascii_case(id.trim()))
    }

    /// Symbol the rule rewrites; `None` for the start rule.
    pub fn lhs(self) -> Option<Symbol> {
        use Symbol::*;
        match self {
            Rule::R0 => None,
            Rule::R1 => Some(S),
            Rule::R2 | Rule::R6 => Some(T),
            Rule::R3 | Rule::R4 => Some(B),
            Rule::R5 => Some(E),
            Rule::R7 => Some(H),
        }
    }

    /// Replacement chain. Only `r3` carries a branch, on its single node.
    pub fn rhs(self) -> Vec<Node> {
        use Symbol::*;
        let chain = |syms: &[Symbol]| syms.iter().map(|&s| Node::leaf(s)).collect::<Vec<_>>();
        match self {
            Rule::R0 => chain(&[S]),
            Rule::R1 => chain(&[H, B, T]),
            Rule::R2 => chain(&[Y, B, T]),
            Rule::R3 => vec![Node {
                symbol: U,
                branches: vec![DesignGraph {
                    spine: chain(&[C, M, E]),
                }],
            }],
            Rule::R4 => chain(&[U]),
            Rule::R5 => chain(&[J, L, E]),
            Rule::R6 => chain(&[C, M, E]),
            Rule::R7 => chain(&[E, M, C]),
        }
    }

    /// Length of the replacement in the rewritten chain (branch nodes excluded).
    pub fn rhs_len(self) -> usize {
        match self {
            Rule::R3 | Rule::R4 | Rule::R0 => 1,
            _ => 3,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Rule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Rule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Rule::from_id(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown rule `{s}`")))
    }
}

impl DesignGraph {
    /// The lone `S` node produced by `r0`.
    pub fn start() -> Self {
        DesignGraph {
            spine: vec![Node::leaf(Symbol::S)],
        }
    }

    /// Builds a graph from an explicit chain. Returns `None` for an empty chain.
    pub fn from_spine(spine: Vec<Node>) -> Option<Self> {
        if spine.is_empty() {
            None
        } else {
            Some(DesignGraph { spine })
        }
    }

    pub fn spine(&self) -> &[Node] {
        &self.spine
    }

    pub fn node(&self, addr: &NodeAddress) -> Option<&Node> {
        let mut chain = self;
        for &(s, b) in &addr.path {
            chain = chain.spine.get(s)?.branches.get(b)?;
        }
        chain.spine.get(addr.index)
    }

    fn chain_mut(&mut self, path: &[(usize, usize)]) -> Option<&mut DesignGraph> {
        let mut chain = self;
        for &(s, b) in path {
            chain = chain.spine.get_mut(s)?.branches.get_mut(b)?;
        }
        Some(chain)
    }

    /// All nodes in depth-first pre-order (a node, then its branches, then
    /// the next node of the chain).
    pub fn nodes(&self) -> Vec<(NodeAddress, &Node)> {
        let mut out = Vec::new();
        self.collect(&[], &mut out);
        out
    }

    fn collect<'a>(&'a self, path: &[(usize, usize)], out: &mut Vec<(NodeAddress, &'a Node)>) {
        for (i, node) in self.spine.iter().enumerate() {
            out.push((
                NodeAddress {
                    path: path.to_vec(),
                    index: i,
                },
                node,
            ));
            for (b, branch) in node.branches.iter().enumerate() {
                let mut sub = path.to_vec();
                sub.push((i, b));
                branch.collect(&sub, out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.spine
            .iter()
            .map(|n| 1 + n.branches.iter().map(DesignGraph::node_count).sum::<usize>())
            .sum()
    }

    /// Addresses holding `symbol`, in pre-order (leftmost first).
    pub fn sites_of(&self, symbol: Symbol) -> Vec<NodeAddress> {
        self.nodes()
            .into_iter()
            .filter(|(_, n)| n.symbol == symbol)
            .map(|(a, _)| a)
            .collect()
    }

    /// Every `(rule, site)` pair that can be applied, rules in id order and
    /// sites in pre-order.
    pub fn applicable(&self) -> Vec<(Rule, NodeAddress)> {
        let mut out = Vec::new();
        for rule in Rule::REWRITES {
            let lhs = rule.lhs().expect("rewrite rules have a lhs");
            for site in self.sites_of(lhs) {
                out.push((rule, site));
            }
        }
        out
    }

    /// Rules with at least one applicable site, in id order.
    pub fn applicable_rules(&self) -> Vec<Rule> {
        let mut present = [false; 11];
        for (_, n) in self.nodes() {
            present[n.symbol as usize] = true;
        }
        Rule::REWRITES
            .into_iter()
            .filter(|r| present[r.lhs().unwrap() as usize])
            .collect()
    }

    /// True when no `S` or `B` remains anywhere.
    pub fn is_complete(&self) -> bool {
        self.spine.iter().all(|n| {
            !n.symbol.is_nonterminal() && n.branches.iter().all(DesignGraph::is_complete)
        })
    }

    /// Depth-first pre-order rendering with parenthesized branches, e.g.
    /// `H-U-(C-M-E)-T`. Also the canonical form used for deduplication.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Parses the textual form. Branches may be written `U-(C-M-E)` or
    /// `U(C-M-E)`; whitespace is ignored.
    pub fn parse(text: &str) -> Result<DesignGraph, GrammarError> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let graph = parse_chain(&chars, &mut pos, text)?;
        if pos != chars.len() {
            return Err(GrammarError::BadGraph {
                text: text.to_string(),
                reason: format!("unexpected `{}`", chars[pos]),
            });
        }
        Ok(graph)
    }
}

fn parse_chain(chars: &[char], pos: &mut usize, text: &str) -> Result<DesignGraph, GrammarError> {
    let bad = |reason: String| GrammarError::BadGraph {
        text: text.to_string(),
        reason,
    };
    let mut spine: Vec<Node> = Vec::new();
    loop {
        match chars.get(*pos) {
            Some('(') => {
                let Some(owner) = spine.last_mut() else {
                    return Err(bad("branch before any node".into()));
                };
                *pos += 1;
                let branch = parse_chain(chars, pos, text)?;
                if chars.get(*pos) != Some(&')') {
                    return Err(bad("unclosed branch".into()));
                }
                *pos += 1;
                owner.branches.push(branch);
            }
            Some(&c) => match Symbol::from_char(c) {
                Some(sym) => {
                    *pos += 1;
                    spine.push(Node::leaf(sym));
                }
                None => return Err(bad(format!("unknown symbol `{c}`"))),
            },
            None => return Err(bad("unexpected end".into())),
        }
        match chars.get(*pos) {
            Some('-') => *pos += 1,
            Some('(') => {}
            _ => break,
        }
    }
    Ok(DesignGraph { spine })
}

impl fmt::Display for DesignGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, node) in self.spine.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}", node.symbol)?;
            for branch in &node.branches {
                write!(f, "-({branch})")?;
            }
        }
        Ok(())
    }
}

/// Rewrites the node at `site` with `rule`'s replacement.
pub fn apply_rule(
    graph: &DesignGraph,
    rule: Rule,
    site: &NodeAddress,
) -> Result<DesignGraph, GrammarError> {
    let lhs = rule.lhs().ok_or(GrammarError::StartRuleMisplaced)?;
    let found = graph
        .node(site)
        .ok_or_else(|| GrammarError::SiteNotFound(site.clone()))?
        .symbol;
    if found != lhs {
        return Err(GrammarError::SymbolMismatch {
            rule,
            site: site.clone(),
            expected: lhs,
            found,
        });
    }
    let mut out = graph.clone();
    let chain = out
        .chain_mut(&site.path)
        .expect("site resolved above, so its chain exists");
    chain.spine.splice(site.index..=site.index, rule.rhs());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub rule: Rule,
    pub site: NodeAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Derivation {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationError {
    /// `step` is 1-based, matching the `Step N:` numbering of the text format.
    #[error("step {step} failed: {cause}")]
    ReplayFailure { step: usize, cause: GrammarError },
    #[error("derivation is empty")]
    Empty,
    #[error("derivation leaves S or B unresolved")]
    IncompleteDesign,
}

impl Derivation {
    /// A derivation containing only `r0`.
    pub fn start() -> Self {
        Derivation {
            steps: vec![Step {
                rule: Rule::R0,
                site: NodeAddress::root(),
            }],
        }
    }

    pub fn push(&mut self, rule: Rule, site: NodeAddress) {
        self.steps.push(Step { rule, site });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One line per step naming the rule, the rewritten symbol and the
    /// resulting graph. Fails like [`snapshots`](Self::snapshots).
    pub fn transcript(&self) -> Result<String, DerivationError> {
        let snapshots = self.snapshots()?;
        let mut out = String::new();
        for (i, (step, graph)) in self.steps.iter().zip(&snapshots).enumerate() {
            let lhs = step.rule.lhs().map_or('S', Symbol::as_char);
            if i == 0 {
                out.push_str(&format!("Step 1: {} starts from S.\n", step.rule));
            } else {
                out.push_str(&format!(
                    "Step {}: {} rewrites {lhs} at {}, giving {graph}.\n",
                    i + 1,
                    step.rule,
                    step.site
                ));
            }
        }
        Ok(out)
    }

    /// Replays every step without requiring the result to be complete.
    pub fn replay(&self) -> Result<DesignGraph, DerivationError> {
        self.snapshots().map(|mut v| v.pop().expect("non-empty"))
    }

    /// The graph after each step.
    pub fn snapshots(&self) -> Result<Vec<DesignGraph>, DerivationError> {
        let first = self.steps.first().ok_or(DerivationError::Empty)?;
        if first.rule != Rule::R0 {
            return Err(DerivationError::ReplayFailure {
                step: 1,
                cause: GrammarError::SymbolMismatch {
                    rule: first.rule,
                    site: first.site.clone(),
                    expected: first.rule.lhs().unwrap_or(Symbol::S),
                    found: Symbol::S,
                },
            });
        }
        let mut graph = DesignGraph::start();
        let mut out = vec![graph.clone()];
        for (i, step) in self.steps.iter().enumerate().skip(1) {
            graph = apply_rule(&graph, step.rule, &step.site).map_err(|cause| {
                DerivationError::ReplayFailure {
                    step: i + 1,
                    cause,
                }
            })?;
            out.push(graph.clone());
        }
        Ok(out)
    }
}

/// Replays `deriv` from `r0` and returns the final graph if it is complete.
pub fn validate_derivation(deriv: &Derivation) -> Result<DesignGraph, DerivationError> {
    let graph = deriv.replay()?;
    if graph.is_complete() {
        Ok(graph)
    } else {
        Err(DerivationError::IncompleteDesign)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerationError {
    #[error("frontier of {size} graphs exceeds the cap of {cap}")]
    BudgetExceeded { size: usize, cap: usize },
    #[error("max_steps {0} is above the supported limit of {MAX_ENUMERATION_STEPS}")]
    TooManySteps(usize),
}

pub const MAX_ENUMERATION_STEPS: usize = 8;
pub const DEFAULT_FRONTIER_CAP: usize = 2_000_000;

/// Every distinct complete graph reachable with at most `max_steps` rule
/// applications (counting `r0`), keyed by canonical form.
pub fn enumerate_complete(
    max_steps: usize,
) -> Result<BTreeMap<String, DesignGraph>, EnumerationError> {
    enumerate_complete_capped(max_steps, DEFAULT_FRONTIER_CAP)
}

pub fn enumerate_complete_capped(
    max_steps: usize,
    cap: usize,
) -> Result<BTreeMap<String, DesignGraph>, EnumerationError> {
    if max_steps > MAX_ENUMERATION_STEPS {
        return Err(EnumerationError::TooManySteps(max_steps));
    }
    let mut complete = BTreeMap::new();
    if max_steps == 0 {
        return Ok(complete);
    }
    // Different derivations of the same graph share all continuations, so
    // the frontier is deduplicated by canonical form at every depth.
    let mut frontier: BTreeMap<String, DesignGraph> = BTreeMap::new();
    let start = DesignGraph::start();
    frontier.insert(start.canonical(), start);
    for depth in 1..=max_steps {
        for (key, g) in &frontier {
            if g.is_complete() {
                complete.entry(key.clone()).or_insert_with(|| g.clone());
            }
        }
        if depth == max_steps {
            break;
        }
        let mut next = BTreeMap::new();
        for g in frontier.values() {
            for (rule, site) in g.applicable() {
                let child = apply_rule(g, rule, &site).expect("applicable site");
                next.entry(child.canonical()).or_insert(child);
                if next.len() > cap {
                    return Err(EnumerationError::BudgetExceeded {
                        size: next.len(),
                        cap,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(complete)
}
