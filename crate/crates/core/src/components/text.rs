//! The three-section design text exchanged with generators:
//!
//! ```text
//! STRUCTURAL RULES:
//! Step 1: r0) S
//! Step 2: r1) H-B-T
//! Step 3: r4) H-U-T
//!
//! COMPONENT RULES:
//! [null]-[body=15cm]-[null]
//!
//! REASONING:
//! ...
//! ```
//!
//! Emission is exact. Parsing tolerates the drift seen in model output:
//! headers in any case with markdown decoration, bullets before steps,
//! missing snapshots (resolved leftmost-first) and prose outside the steps.

use thiserror::Error;

use super::{
    assign_components, quantize_angle, quantize_length, BodyJoint, Component, ComponentAssignment,
    ComponentError, DesignRecord, EndKind, LimbJoint,
};
use crate::grammar::{
    apply_rule, Derivation, DerivationError, DesignGraph, GrammarError, NodeAddress, Rule, Step,
    Symbol,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignTextError {
    /// `line` is 1-based; 0 means the section is missing altogether.
    #[error("{section}: line {line}: {reason}")]
    Format {
        section: &'static str,
        line: usize,
        reason: String,
    },
    #[error("step {step} lists `{listed}`, which no application of the rule produces")]
    SnapshotMismatch { step: usize, listed: String },
    #[error(transparent)]
    Replay(#[from] DerivationError),
    #[error("component line {line}: {reason}")]
    ComponentParse { line: usize, reason: String },
    #[error(transparent)]
    Component(#[from] ComponentError),
}

const STRUCTURAL: &str = "STRUCTURAL RULES";
const COMPONENT: &str = "COMPONENT RULES";
const REASONING: &str = "REASONING";

/// Renders a record in the wire format. Step snapshots come from replaying
/// the derivation, so the record must validate.
pub fn emit_design_text(record: &DesignRecord) -> String {
    let snapshots = record
        .derivation
        .snapshots()
        .expect("emit_design_text requires a replayable derivation");
    let mut out = String::from("STRUCTURAL RULES:\n");
    for (i, (step, graph)) in record.derivation.steps.iter().zip(&snapshots).enumerate() {
        out.push_str(&format!("Step {}: {}) {}\n", i + 1, step.rule, graph));
    }
    out.push_str("\nCOMPONENT RULES:\n");
    let last = snapshots.last().expect("non-empty");
    out.push_str(&record.components.render(last));
    out.push_str("\n\nREASONING:\n");
    if !record.reasoning.is_empty() {
        out.push_str(&record.reasoning);
        out.push('\n');
    }
    out
}

/// Parses generator output into a validated record (fitness absent).
pub fn parse_design_text(text: &str) -> Result<DesignRecord, DesignTextError> {
    let lines: Vec<&str> = text.lines().collect();
    let structural = find_header(&lines, 0, STRUCTURAL).ok_or(DesignTextError::Format {
        section: STRUCTURAL,
        line: 0,
        reason: "header not found".into(),
    })?;
    let component = find_header(&lines, structural.0 + 1, COMPONENT).ok_or(DesignTextError::Format {
        section: COMPONENT,
        line: 0,
        reason: "header not found after STRUCTURAL RULES".into(),
    })?;
    let reasoning = find_header(&lines, component.0 + 1, REASONING).ok_or(DesignTextError::Format {
        section: REASONING,
        line: 0,
        reason: "header not found after COMPONENT RULES".into(),
    })?;

    let steps = parse_steps(&lines, structural.0 + 1, component.0)?;
    let (derivation, graph) = replay_listed(&steps)?;

    let (comp_line_no, comp_line) = component_line(&lines, component, reasoning.0)?;
    let components = parse_component_line(comp_line, comp_line_no, &graph)?;
    let components = assign_components(&graph, components)?;

    let mut body: Vec<&str> = Vec::new();
    if !reasoning.1.is_empty() {
        body.push(reasoning.1);
    }
    body.extend_from_slice(&lines[reasoning.0 + 1..]);
    let reasoning_text = body.join("\n");

    Ok(DesignRecord::new(derivation, components, &reasoning_text))
}

/// Finds the first header named `name` at or after `from`; returns its line
/// index and any inline text following the header.
fn find_header<'a>(lines: &[&'a str], from: usize, name: &str) -> Option<(usize, &'a str)> {
    (from..lines.len()).find_map(|i| header_rest(lines[i], name).map(|rest| (i, rest)))
}

fn header_rest<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let trimmed = line
        .trim()
        .trim_start_matches(|c: char| matches!(c, '#' | '*' | '_' | '>' | '`') || c.is_whitespace());
    let head = trimmed.get(..name.len())?;
    if !head.eq_ignore_ascii_case(name) {
        return None;
    }
    let rest = &trimmed[name.len()..];
    // Reject words that merely start with the header name.
    if rest.chars().next().is_some_and(|c| c.is_alphanumeric()) {
        return None;
    }
    Some(
        rest.trim_start_matches(|c: char| matches!(c, '*' | '_' | ':' | '#') || c.is_whitespace())
            .trim_end_matches(|c: char| matches!(c, '*' | '_' | '#') || c.is_whitespace()),
    )
}

struct ListedStep {
    number: usize,
    line: usize,
    rule: Rule,
    snapshot: Option<DesignGraph>,
}

fn parse_steps(lines: &[&str], from: usize, to: usize) -> Result<Vec<ListedStep>, DesignTextError> {
    let mut steps = Vec::new();
    for (i, raw) in lines.iter().enumerate().take(to).skip(from) {
        let line_no = i + 1;
        let fail = |reason: String| DesignTextError::Format {
            section: STRUCTURAL,
            line: line_no,
            reason,
        };
        let body = raw
            .trim()
            .trim_start_matches(|c: char| matches!(c, '-' | '*' | '•' | '>' | '_') || c.is_whitespace());
        let Some(after_step) = strip_prefix_ci(body, "step") else {
            continue;
        };
        let (num, rest) = after_step
            .split_once(':')
            .ok_or_else(|| fail("expected `Step N:`".into()))?;
        let number: usize = num
            .trim()
            .trim_matches('*')
            .parse()
            .map_err(|_| fail(format!("bad step number `{}`", num.trim())))?;
        let rest = rest.trim().trim_start_matches('*').trim();
        let digits_end = rest
            .char_indices()
            .skip(1)
            .find(|(_, c)| !c.is_ascii_digit())
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let rule = rest
            .get(..digits_end)
            .filter(|t| t.len() > 1 && t.starts_with(['r', 'R']))
            .and_then(Rule::from_id)
            .ok_or_else(|| fail(format!("expected a rule id r0..r7 in `{rest}`")))?;
        let snapshot_text = rest[digits_end..]
            .trim_start_matches([')', ':', '.'])
            .trim()
            .trim_matches('*')
            .trim()
            .trim_end_matches('.');
        let snapshot = if snapshot_text.is_empty() || snapshot_text.starts_with("...") {
            None
        } else {
            Some(DesignGraph::parse(snapshot_text).map_err(|e| fail(e.to_string()))?)
        };
        if number != steps.len() + 1 {
            return Err(fail(format!("expected step {}, found step {number}", steps.len() + 1)));
        }
        steps.push(ListedStep {
            number,
            line: line_no,
            rule,
            snapshot,
        });
    }
    if steps.is_empty() {
        return Err(DesignTextError::Format {
            section: STRUCTURAL,
            line: from,
            reason: "no steps listed".into(),
        });
    }
    Ok(steps)
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

/// Recovers the site of every step: the leftmost site whose rewrite matches
/// the listed snapshot, or simply the leftmost site when none is listed.
fn replay_listed(steps: &[ListedStep]) -> Result<(Derivation, DesignGraph), DesignTextError> {
    let first = &steps[0];
    if first.rule != Rule::R0 {
        return Err(DerivationError::ReplayFailure {
            step: 1,
            cause: GrammarError::SymbolMismatch {
                rule: first.rule,
                site: NodeAddress::root(),
                expected: first.rule.lhs().unwrap_or(Symbol::S),
                found: Symbol::S,
            },
        }
        .into());
    }
    let mut graph = DesignGraph::start();
    if let Some(snap) = &first.snapshot {
        if *snap != graph {
            return Err(DesignTextError::SnapshotMismatch {
                step: 1,
                listed: snap.to_string(),
            });
        }
    }
    let mut derivation = Derivation::start();
    for step in &steps[1..] {
        let Some(lhs) = step.rule.lhs() else {
            return Err(DerivationError::ReplayFailure {
                step: step.number,
                cause: GrammarError::StartRuleMisplaced,
            }
            .into());
        };
        let sites = graph.sites_of(lhs);
        if sites.is_empty() {
            return Err(DerivationError::ReplayFailure {
                step: step.number,
                cause: GrammarError::NoSite(step.rule),
            }
            .into());
        }
        let chosen = match &step.snapshot {
            None => {
                let site = sites[0].clone();
                let next = apply_rule(&graph, step.rule, &site).expect("site holds lhs");
                (site, next)
            }
            Some(snap) => sites
                .into_iter()
                .find_map(|site| {
                    let next = apply_rule(&graph, step.rule, &site).expect("site holds lhs");
                    (next == *snap).then_some((site, next))
                })
                .ok_or_else(|| DesignTextError::SnapshotMismatch {
                    step: step.number,
                    listed: snap.to_string(),
                })?,
        };
        derivation.steps.push(Step {
            rule: step.rule,
            site: chosen.0,
        });
        graph = chosen.1;
        let _ = step.line;
    }
    if !graph.is_complete() {
        return Err(DerivationError::IncompleteDesign.into());
    }
    Ok((derivation, graph))
}

fn component_line<'a>(
    lines: &[&'a str],
    header: (usize, &'a str),
    end: usize,
) -> Result<(usize, &'a str), DesignTextError> {
    if header.1.contains('[') {
        return Ok((header.0 + 1, header.1));
    }
    (header.0 + 1..end)
        .find(|&i| lines[i].contains('['))
        .map(|i| (i + 1, lines[i]))
        .ok_or(DesignTextError::Format {
            section: COMPONENT,
            line: header.0 + 1,
            reason: "no component line".into(),
        })
}

/// A `[token]` chain with parenthesized branches, mirroring graph shape.
struct TokenChain {
    items: Vec<(String, Vec<TokenChain>)>,
}

fn parse_component_line(
    line: &str,
    line_no: usize,
    graph: &DesignGraph,
) -> Result<ComponentAssignment, DesignTextError> {
    let fail = |reason: String| DesignTextError::ComponentParse {
        line: line_no,
        reason,
    };
    let start = line.find('[').expect("caller checked for `[`");
    let end = line.rfind([']', ')']).map(|i| i + 1).unwrap_or(line.len());
    let chars: Vec<char> = line[start..end.max(start)].chars().collect();
    let mut pos = 0;
    let chain = parse_token_chain(&chars, &mut pos).map_err(&fail)?;
    skip_ws(&chars, &mut pos);
    if pos != chars.len() {
        return Err(fail(format!("unexpected `{}`", chars[pos])));
    }
    let mut out = ComponentAssignment::new();
    match_shape(&chain, graph, &[], &mut out).map_err(|e| match e {
        ShapeError::Shape(reason) => fail(reason),
        ShapeError::Token(reason) => fail(reason),
        ShapeError::Category(err) => DesignTextError::Component(err),
    })?;
    Ok(out)
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while chars.get(*pos).is_some_and(|c| c.is_whitespace()) {
        *pos += 1;
    }
}

fn parse_token_chain(chars: &[char], pos: &mut usize) -> Result<TokenChain, String> {
    let mut items: Vec<(String, Vec<TokenChain>)> = Vec::new();
    loop {
        skip_ws(chars, pos);
        match chars.get(*pos) {
            Some('[') => {
                *pos += 1;
                let mut token = String::new();
                loop {
                    match chars.get(*pos) {
                        Some(']') => {
                            *pos += 1;
                            break;
                        }
                        Some('[') | None => return Err("unclosed `[`".into()),
                        Some(&c) => {
                            token.push(c);
                            *pos += 1;
                        }
                    }
                }
                items.push((token, Vec::new()));
            }
            Some('(') => {
                let Some(owner) = items.last_mut() else {
                    return Err("branch before any component".into());
                };
                *pos += 1;
                let branch = parse_token_chain(chars, pos)?;
                skip_ws(chars, pos);
                if chars.get(*pos) != Some(&')') {
                    return Err("unclosed `(`".into());
                }
                *pos += 1;
                owner.1.push(branch);
            }
            Some(&c) => return Err(format!("unexpected `{c}`")),
            None => return Err("unexpected end of component line".into()),
        }
        skip_ws(chars, pos);
        match chars.get(*pos) {
            Some('-') => *pos += 1,
            Some('(') => {}
            _ => break,
        }
    }
    Ok(TokenChain { items })
}

enum ShapeError {
    Shape(String),
    Token(String),
    Category(ComponentError),
}

fn match_shape(
    chain: &TokenChain,
    graph: &DesignGraph,
    path: &[(usize, usize)],
    out: &mut ComponentAssignment,
) -> Result<(), ShapeError> {
    let spine = graph.spine();
    if chain.items.len() != spine.len() {
        return Err(ShapeError::Shape(format!(
            "chain `{graph}` has {} nodes but {} components are listed",
            spine.len(),
            chain.items.len()
        )));
    }
    for (i, ((token, branches), node)) in chain.items.iter().zip(spine).enumerate() {
        let addr = NodeAddress {
            path: path.to_vec(),
            index: i,
        };
        if branches.len() != node.branches.len() {
            return Err(ShapeError::Shape(format!(
                "node {addr} ({}) has {} branches but {} are listed",
                node.symbol,
                node.branches.len(),
                branches.len()
            )));
        }
        out.insert(addr.clone(), parse_token(node.symbol, token, &addr)?);
        for (b, (tokens, sub)) in branches.iter().zip(&node.branches).enumerate() {
            let mut sub_path = path.to_vec();
            sub_path.push((i, b));
            match_shape(tokens, sub, &sub_path, out)?;
        }
    }
    Ok(())
}

fn parse_token(symbol: Symbol, raw: &str, addr: &NodeAddress) -> Result<Component, ShapeError> {
    let token: String = raw
        .chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '{' | '}' | '"' | '\''))
        .collect::<String>()
        .to_ascii_lowercase();
    let (key, value) = match token.split_once('=') {
        Some((k, v)) => (k, Some(v)),
        None => (token.as_str(), None),
    };
    let unknown = || ShapeError::Token(format!("unknown component `{raw}` at {addr}"));
    let comp = match (key, value) {
        ("null" | "none", None) => match symbol {
            Symbol::E => Component::End(EndKind::Null),
            _ => Component::Null,
        },
        ("body", Some(v)) => Component::Body(parse_length(v).ok_or_else(unknown)?),
        ("limb", Some(v)) => Component::Limb(parse_length(v).ok_or_else(unknown)?),
        ("rigid", None) => match symbol {
            Symbol::J => Component::LimbJoint(LimbJoint::Rigid),
            _ => Component::BodyJoint(BodyJoint::Rigid),
        },
        ("roll", None) => match symbol {
            Symbol::J => Component::LimbJoint(LimbJoint::Roll),
            _ => Component::BodyJoint(BodyJoint::Roll),
        },
        ("twist", None) => Component::BodyJoint(BodyJoint::Twist),
        ("knee", Some(v)) => Component::LimbJoint(LimbJoint::Knee(parse_angle(v).ok_or_else(unknown)?)),
        ("elbow", Some(v)) => Component::LimbJoint(LimbJoint::Elbow(parse_angle(v).ok_or_else(unknown)?)),
        ("connector", None) => Component::Connector,
        ("mount", None) => Component::Mount,
        ("wheel", None) => Component::End(EndKind::Wheel),
        _ => return Err(unknown()),
    };
    if !comp.fits(symbol) {
        return Err(ShapeError::Category(ComponentError::WrongCategory {
            node: addr.clone(),
            symbol,
            component: raw.trim().to_string(),
        }));
    }
    Ok(comp)
}

/// Accepts `15cm`, `0.15m` and `150mm`; returns meters on the length lattice.
fn parse_length(v: &str) -> Option<f64> {
    let (num, scale) = if let Some(n) = v.strip_suffix("cm") {
        (n, 0.01)
    } else if let Some(n) = v.strip_suffix("mm") {
        (n, 0.001)
    } else if let Some(n) = v.strip_suffix('m') {
        (n, 1.0)
    } else {
        return None;
    };
    let x: f64 = num.parse().ok()?;
    x.is_finite().then(|| quantize_length(x * scale))
}

/// Accepts `45deg`, `45°`, `45degrees` and a bare `45`; returns degrees.
fn parse_angle(v: &str) -> Option<f64> {
    let num = v
        .strip_suffix("degrees")
        .or_else(|| v.strip_suffix("deg"))
        .or_else(|| v.strip_suffix('°'))
        .unwrap_or(v);
    let x: f64 = num.parse().ok()?;
    x.is_finite().then(|| quantize_angle(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r4) H-U-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-[null]\n\nREASONING:\nA single torso.\n";

    #[test]
    fn minimal_text_parses() {
        let rec = parse_design_text(MINIMAL).unwrap();
        assert_eq!(rec.validate().unwrap().canonical(), "H-U-T");
        assert_eq!(rec.reasoning, "A single torso.");
        assert_eq!(emit_design_text(&rec), MINIMAL);
    }

    #[test]
    fn emitted_text_starts_with_header_and_r0() {
        let rec = parse_design_text(MINIMAL).unwrap();
        let text = emit_design_text(&rec);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("STRUCTURAL RULES:"));
        assert_eq!(lines.next(), Some("Step 1: r0) S"));
    }

    #[test]
    fn branch_renders_parenthesized() {
        let text = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r3) H-U-(C-M-E)-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-([connector]-[mount]-[wheel])-[null]\n\nREASONING:\nWheel.\n";
        let rec = parse_design_text(text).unwrap();
        let out = emit_design_text(&rec);
        assert!(out.contains("U-(C-M-E)"));
        assert_eq!(out, text);
    }

    #[test]
    fn empty_reasoning_keeps_header() {
        let mut rec = parse_design_text(MINIMAL).unwrap();
        rec.reasoning.clear();
        let text = emit_design_text(&rec);
        assert!(text.ends_with("REASONING:\n"));
        assert_eq!(parse_design_text(&text).unwrap(), rec);
    }

    #[test]
    fn missing_component_header_is_format_error() {
        let text = MINIMAL.replace("COMPONENT RULES:", "PARTS:");
        assert!(matches!(
            parse_design_text(&text),
            Err(DesignTextError::Format { section: COMPONENT, .. })
        ));
    }

    #[test]
    fn contradicting_snapshot_is_rejected() {
        let text = MINIMAL.replace("Step 3: r4) H-U-T", "Step 3: r4) H-U-U-T");
        assert!(matches!(
            parse_design_text(&text),
            Err(DesignTextError::SnapshotMismatch { step: 3, .. })
        ));
    }

    #[test]
    fn snapshot_selects_the_site() {
        // Two B's: the snapshot says the second one was rewritten first.
        let text = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r2) H-B-Y-B-T\nStep 4: r3) H-B-Y-U-(C-M-E)-T\nStep 5: r4) H-U-Y-U-(C-M-E)-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-[rigid]-[body=15cm]-([connector]-[mount]-[null])-[null]\n\nREASONING:\nx\n";
        let rec = parse_design_text(text).unwrap();
        assert_eq!(rec.derivation.steps[3].site, NodeAddress::spine(3));
        assert_eq!(rec.derivation.steps[4].site, NodeAddress::spine(1));
        // Without snapshots, sites resolve leftmost-first.
        let bare = text
            .lines()
            .map(|l| match l.find(") ") {
                Some(i) if l.starts_with("Step") => &l[..=i],
                _ => l,
            })
            .collect::<Vec<_>>()
            .join("\n")
            .replace(
                "[null]-[body=15cm]-[rigid]-[body=15cm]-([connector]-[mount]-[null])-[null]",
                "[null]-[body=15cm]-([connector]-[mount]-[null])-[rigid]-[body=15cm]-[null]",
            );
        let rec = parse_design_text(&bare).unwrap();
        assert_eq!(rec.derivation.steps[3].site, NodeAddress::spine(1));
        assert_eq!(rec.validate().unwrap().canonical(), "H-U-(C-M-E)-Y-U-T");
    }

    #[test]
    fn tolerates_markdown_and_case() {
        let text = "Here is my robot.\n\n### Structural Rules:\n- **Step 1:** r0) S\n- **Step 2:** r1) H-B-T\n- **Step 3:** r4) H-U-T\n\n**component rules:**\n Final: [null]-[body=0.15m]-[null]\n\n**Reasoning:** Simple and\nsturdy.";
        let rec = parse_design_text(text).unwrap();
        assert_eq!(rec.reasoning, "Simple and\nsturdy.");
        assert_eq!(rec.components.get(&NodeAddress::spine(1)), Some(&Component::Body(0.15)));
    }

    #[test]
    fn component_errors() {
        let wrong_shape = MINIMAL.replace("[null]-[body=15cm]-[null]", "[null]-[body=15cm]");
        assert!(matches!(parse_design_text(&wrong_shape), Err(DesignTextError::ComponentParse { .. })));
        let unknown = MINIMAL.replace("body=15cm", "torso");
        assert!(matches!(parse_design_text(&unknown), Err(DesignTextError::ComponentParse { .. })));
        let category = MINIMAL.replace("body=15cm", "wheel");
        assert!(matches!(
            parse_design_text(&category),
            Err(DesignTextError::Component(ComponentError::WrongCategory { .. }))
        ));
        let range = MINIMAL.replace("body=15cm", "body=20cm");
        assert!(matches!(
            parse_design_text(&range),
            Err(DesignTextError::Component(ComponentError::OutOfRange { .. }))
        ));
    }

    #[test]
    fn replay_errors() {
        let incomplete = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nCOMPONENT RULES:\n[null]-[body=15cm]-[null]\nREASONING:\n";
        assert!(matches!(
            parse_design_text(incomplete),
            Err(DesignTextError::Replay(DerivationError::IncompleteDesign))
        ));
        let no_site = MINIMAL.replace("Step 2: r1) H-B-T", "Step 2: r2) H-B-T");
        assert!(matches!(
            parse_design_text(&no_site),
            Err(DesignTextError::Replay(DerivationError::ReplayFailure { step: 2, .. }))
        ));
        let skipped = MINIMAL.replace("Step 3:", "Step 4:");
        assert!(matches!(parse_design_text(&skipped), Err(DesignTextError::Format { .. })));
    }

    #[test]
    fn lengths_and_angles() {
        assert_eq!(parse_length("15cm"), Some(0.15));
        assert_eq!(parse_length("0.15m"), Some(0.15));
        assert_eq!(parse_length("12.5cm"), Some(0.125));
        assert_eq!(parse_length("125mm"), Some(0.125));
        assert_eq!(parse_length("15"), None);
        assert_eq!(parse_length("nancm"), None);
        assert_eq!(parse_angle("60deg"), Some(60.0));
        assert_eq!(parse_angle("60°"), Some(60.0));
        assert_eq!(parse_angle("12.5"), Some(12.5));
        assert_eq!(parse_angle("x"), None);
    }
}
