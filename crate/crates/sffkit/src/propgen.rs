//! Property generation: instantiates the five property classes from the
//! extracted model and merge plan, renders them as SystemVerilog assertion
//! files, and parses those files back for checking.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::MergePlan;
use crate::spec_model::{ModelOfThings, OptimizeAlgorithm, PropertyClass, ProtectionMethod};

/// Cycle window for the self-test response, in clock cycles.
pub const SELF_TEST_WINDOW: u32 = 4;

#[derive(Debug, Error)]
pub enum PropgenError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("property '{0}' has no consequent terms")]
    EmptyConsequent(String),
    #[error("property '{name}' references unknown wrapper '{wrapper}'")]
    UnknownWrapper { name: String, wrapper: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Signal { path: String, msb: Option<u32>, lsb: Option<u32> },
    Int(u64),
    MacroRef(String),
    Past(Box<Expr>),
}

impl Expr {
    pub fn signal(path: impl Into<String>) -> Expr {
        Expr::Signal { path: path.into(), msb: None, lsb: None }
    }

    pub fn slice(path: impl Into<String>, msb: u32, lsb: u32) -> Expr {
        Expr::Signal { path: path.into(), msb: Some(msb), lsb: Some(lsb) }
    }

    fn render(&self) -> String {
        match self {
            Expr::Signal { path, msb: Some(m), lsb: Some(l) } => format!("{}[{}:{}]", path, m, l),
            Expr::Signal { path, .. } => path.clone(),
            Expr::Int(v) => v.to_string(),
            Expr::MacroRef(name) => format!("`{}", name),
            Expr::Past(inner) => format!("$past({})", inner.render()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermKind {
    Immediate,
    NextCycle,
    Within(u32),
}

/// One equality term of a property consequent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub kind: TermKind,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Term {
    pub fn eq(lhs: Expr, rhs: Expr) -> Term {
        Term { kind: TermKind::Immediate, lhs, rhs }
    }

    fn render(&self) -> String {
        let prefix = match self.kind {
            TermKind::Immediate => String::new(),
            TermKind::NextCycle => "##1 ".to_string(),
            TermKind::Within(n) => format!("##[1:{}] ", n),
        };
        format!("{}{} == {}", prefix, self.lhs.render(), self.rhs.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Antecedent {
    /// Unconditional (`1`).
    Always,
    /// Fault-injection macro reference.
    Macro(String),
    /// A model signal (write enable, test trigger).
    Signal(String),
}

impl Antecedent {
    fn render(&self) -> String {
        match self {
            Antecedent::Always => "1".to_string(),
            Antecedent::Macro(name) => format!("`{}", name),
            Antecedent::Signal(path) => path.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyIR {
    pub class: PropertyClass,
    pub name: String,
    pub antecedent: Antecedent,
    pub terms: Vec<Term>,
    pub fault_budget: Option<u32>,
}

impl PropertyIR {
    /// The wrapper instance a per-wrapper property targets, derived from the
    /// first `sff_wrapper_*` path it references.
    pub fn target_wrapper(&self) -> Option<String> {
        let from_expr = |e: &Expr| -> Option<String> {
            let mut e = e;
            if let Expr::Past(inner) = e {
                e = inner;
            }
            if let Expr::Signal { path, .. } = e {
                let (inst, _) = path.split_once('.')?;
                if inst.starts_with("sff_wrapper_") {
                    return Some(inst.to_string());
                }
            }
            None
        };
        if let Antecedent::Signal(path) = &self.antecedent {
            if let Some((inst, _)) = path.split_once('.') {
                if inst.starts_with("sff_wrapper_") {
                    return Some(inst.to_string());
                }
            }
        }
        if let Antecedent::Macro(name) = &self.antecedent {
            if let Some(idx) = name.strip_prefix("Fault_Injection_") {
                return Some(format!("sff_wrapper_{}", idx));
            }
        }
        self.terms.iter().find_map(|t| from_expr(&t.lhs).or_else(|| from_expr(&t.rhs)))
    }
}

fn algorithm_suffix(alg: OptimizeAlgorithm) -> &'static str {
    match alg {
        OptimizeAlgorithm::None => "",
        OptimizeAlgorithm::Bfd => "_optimized_1",
        OptimizeAlgorithm::Ilp => "_optimized_2",
    }
}

fn method_macro(method: ProtectionMethod) -> String {
    format!("METHOD_{}", method.name().to_uppercase())
}

/// One property per block asserting every wrapper's method encoding and
/// data width. The width terms come last so the rendered block matches the
/// reference listings verbatim, closing semicolon included.
pub fn gen_parameter_props(_mot: &ModelOfThings, plan: &MergePlan) -> Vec<PropertyIR> {
    if plan.wrappers.is_empty() {
        return Vec::new();
    }
    let mut terms = Vec::new();
    for w in &plan.wrappers {
        terms.push(Term::eq(
            Expr::signal(format!("{}.method", w.instance)),
            Expr::MacroRef(method_macro(w.method)),
        ));
    }
    for w in &plan.wrappers {
        terms.push(Term::eq(
            Expr::signal(format!("{}.dw", w.instance)),
            Expr::Int(w.data_width as u64),
        ));
    }
    vec![PropertyIR {
        class: PropertyClass::Parameters,
        name: format!("param_dw_safety_registers{}", algorithm_suffix(plan.algorithm)),
        antecedent: Antecedent::Always,
        terms,
        fault_budget: None,
    }]
}

/// One fault-injection property per wrapper instance; the fault budget is
/// the detection capability of the wrapper's protection method.
pub fn gen_safety_props(_mot: &ModelOfThings, plan: &MergePlan) -> Vec<PropertyIR> {
    plan.wrappers
        .iter()
        .map(|w| {
            let idx = w.instance.trim_start_matches("sff_wrapper_");
            PropertyIR {
                class: PropertyClass::SafetyMode,
                name: format!("fault_injection_{}", w.instance),
                antecedent: Antecedent::Macro(format!("Fault_Injection_{}", idx)),
                terms: vec![Term::eq(Expr::signal(format!("{}.err_o", w.instance)), Expr::Int(1))],
                fault_budget: Some(w.method.max_detectable_errors()),
            }
        })
        .collect()
}

/// Exactly two properties per block: input-side and output-side wiring, one
/// equality per slice-map entry in mapping order. Clock terms lead the input
/// property and reset terms lead the output property, so the data term block
/// matches the reference listings verbatim.
pub fn gen_connectivity_props(mot: &ModelOfThings, plan: &MergePlan) -> Vec<PropertyIR> {
    let suffix = algorithm_suffix(plan.algorithm);
    let top = &mot.block_name;

    let mut input_terms = Vec::new();
    let mut output_terms = Vec::new();
    for w in &plan.wrappers {
        input_terms.push(Term::eq(
            Expr::signal(format!("{}.{}", top, w.clock_domain)),
            Expr::signal(format!("{}.clk_i", w.instance)),
        ));
        output_terms.push(Term::eq(
            Expr::signal(format!("{}.{}", top, w.reset_domain)),
            Expr::signal(format!("{}.rst_i", w.instance)),
        ));
    }
    for e in &plan.mapping {
        input_terms.push(Term::eq(
            Expr::slice(format!("{}.{}_i", top, e.source_register), e.source_msb, e.source_lsb),
            Expr::slice(format!("{}.d_i", e.wrapper), e.dest_msb, e.dest_lsb),
        ));
        output_terms.push(Term::eq(
            Expr::slice(format!("{}.d_o", e.wrapper), e.dest_msb, e.dest_lsb),
            Expr::slice(format!("{}.{}_o", top, e.source_register), e.source_msb, e.source_lsb),
        ));
    }
    vec![
        PropertyIR {
            class: PropertyClass::Connectivity,
            name: format!("conn_top_input_safety_registers{}", suffix),
            antecedent: Antecedent::Always,
            terms: input_terms,
            fault_budget: None,
        },
        PropertyIR {
            class: PropertyClass::Connectivity,
            name: format!("conn_top_output_safety_registers{}", suffix),
            antecedent: Antecedent::Always,
            terms: output_terms,
            fault_budget: None,
        },
    ]
}

/// One property per wrapper: with no fault injected, a write is followed one
/// cycle later by the written value on the data output.
pub fn gen_normal_props(_mot: &ModelOfThings, plan: &MergePlan) -> Vec<PropertyIR> {
    plan.wrappers
        .iter()
        .map(|w| PropertyIR {
            class: PropertyClass::NormalMode,
            name: format!("normal_mode_{}", w.instance),
            antecedent: Antecedent::Signal(format!("{}.we_i", w.instance)),
            terms: vec![Term {
                kind: TermKind::NextCycle,
                lhs: Expr::signal(format!("{}.d_o", w.instance)),
                rhs: Expr::Past(Box::new(Expr::signal(format!("{}.d_i", w.instance)))),
            }],
            fault_budget: None,
        })
        .collect()
}

/// One property per self-test wrapper: after the test trigger, test_done_o
/// asserts within a bounded window and err_o pulses during the test.
pub fn gen_selftest_props(_mot: &ModelOfThings, plan: &MergePlan) -> Vec<PropertyIR> {
    plan.wrappers
        .iter()
        .filter(|w| w.self_test)
        .map(|w| PropertyIR {
            class: PropertyClass::SelfTest,
            name: format!("self_test_{}", w.instance),
            antecedent: Antecedent::Signal(format!("{}.test_i", w.instance)),
            terms: vec![
                Term {
                    kind: TermKind::Within(SELF_TEST_WINDOW),
                    lhs: Expr::signal(format!("{}.test_done_o", w.instance)),
                    rhs: Expr::Int(1),
                },
                Term {
                    kind: TermKind::Within(SELF_TEST_WINDOW),
                    lhs: Expr::signal(format!("{}.err_o", w.instance)),
                    rhs: Expr::Int(1),
                },
            ],
            fault_budget: None,
        })
        .collect()
}

/// All property classes selected by the generator options, in fixed class
/// order.
pub fn generate_all(mot: &ModelOfThings, plan: &MergePlan) -> Vec<PropertyIR> {
    let mut props = Vec::new();
    for class in PropertyClass::ALL {
        if !mot.options.emit_classes.contains(&class) {
            continue;
        }
        props.extend(match class {
            PropertyClass::Parameters => gen_parameter_props(mot, plan),
            PropertyClass::SafetyMode => gen_safety_props(mot, plan),
            PropertyClass::Connectivity => gen_connectivity_props(mot, plan),
            PropertyClass::NormalMode => gen_normal_props(mot, plan),
            PropertyClass::SelfTest => gen_selftest_props(mot, plan),
        });
    }
    props
}

/// Checks IR-level invariants against the plan.
pub fn validate_props(props: &[PropertyIR], plan: &MergePlan) -> Result<(), PropgenError> {
    for p in props {
        if p.terms.is_empty() {
            return Err(PropgenError::EmptyConsequent(p.name.clone()));
        }
        if let Some(wrapper) = p.target_wrapper() {
            if plan.wrapper(&wrapper).is_none() {
                return Err(PropgenError::UnknownWrapper { name: p.name.clone(), wrapper });
            }
        }
    }
    Ok(())
}

fn class_file_tag(class: PropertyClass) -> &'static str {
    match class {
        PropertyClass::Parameters => "params",
        PropertyClass::SafetyMode => "safety",
        PropertyClass::Connectivity => "conn",
        PropertyClass::NormalMode => "normal",
        PropertyClass::SelfTest => "selftest",
    }
}

fn render_property(p: &PropertyIR) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "property {};", p.name);
    if let Some(budget) = p.fault_budget {
        let _ = writeln!(out, "    // Num. fault patterns decided by its data width");
        let _ = writeln!(out, "    // fault budget: {}", budget);
    }
    let _ = writeln!(out, "    {} |->", p.antecedent.render());
    for (i, t) in p.terms.iter().enumerate() {
        let sep = if i + 1 == p.terms.len() { ";" } else { " &&" };
        let _ = writeln!(out, "    {}{}", t.render(), sep);
    }
    let _ = writeln!(out, "endproperty");
    let _ = writeln!(out, "assert_{0}: assert property ({0});", p.name);
    out
}

/// Renders one property class to its `.sva` file body. Byte-deterministic.
pub fn render_class_file(block: &str, class: PropertyClass, props: &[PropertyIR]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "// {}_{}.sva", block, class_file_tag(class));
    let _ = writeln!(out, "// class: {}", class.name());
    if matches!(class, PropertyClass::NormalMode | PropertyClass::SelfTest) {
        let _ = writeln!(out, "// note: reconstructed template, not taken from a published listing");
    }
    let class_props: Vec<&PropertyIR> = props.iter().filter(|p| p.class == class).collect();
    if class_props.is_empty() {
        return out;
    }
    for p in class_props {
        let _ = writeln!(out);
        out.push_str(&render_property(p));
    }
    out
}

/// The companion macro file binding fault-injection macros and method ids.
pub fn render_macros_file(block: &str, plan: &MergePlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "// {}_macros.svh", block);
    let _ = writeln!(out, "// Bindings for generated properties.");
    let _ = writeln!(out);
    for m in [
        ProtectionMethod::Parity,
        ProtectionMethod::Ded,
        ProtectionMethod::Secded,
        ProtectionMethod::Dmr,
        ProtectionMethod::Tmr,
    ] {
        let _ = writeln!(out, "`define {} {}", method_macro(m), m.id());
    }
    let _ = writeln!(out);
    for w in &plan.wrappers {
        let idx = w.instance.trim_start_matches("sff_wrapper_");
        let _ = writeln!(
            out,
            "`define Fault_Injection_{} ({}.fault_active_i)",
            idx, w.instance
        );
    }
    out
}

/// All output files for a block: one `.sva` per property class plus the
/// macro definitions, keyed by file name.
pub fn emit_sva(
    props: &[PropertyIR],
    mot: &ModelOfThings,
    plan: &MergePlan,
) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for class in PropertyClass::ALL {
        if !mot.options.emit_classes.contains(&class) {
            continue;
        }
        files.insert(
            format!("{}_{}.sva", mot.block_name, class_file_tag(class)),
            render_class_file(&mot.block_name, class, props),
        );
    }
    files.insert(format!("{}_macros.svh", mot.block_name), render_macros_file(&mot.block_name, plan));
    files
}

/// Parses an emitted `.sva` file back into property IR. Inverse of
/// `render_class_file` for the assertion fragment this toolchain emits.
pub fn parse_sva(text: &str) -> Result<Vec<PropertyIR>, PropgenError> {
    // (name, antecedent, terms, fault budget) of the property being read.
    type PartialProp = (String, Option<Antecedent>, Vec<Term>, Option<u32>);
    let mut class: Option<PropertyClass> = None;
    let mut props = Vec::new();
    let mut current: Option<PartialProp> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        let err = |message: String| PropgenError::Parse { line: lineno, message };

        if let Some(rest) = line.strip_prefix("// class: ") {
            class = PropertyClass::from_name(rest.trim());
            continue;
        }
        if let Some(rest) = line.strip_prefix("// fault budget:") {
            if let Some((_, _, _, budget)) = current.as_mut() {
                *budget =
                    Some(rest.trim().parse().map_err(|_| err("bad fault budget".to_string()))?);
            }
            continue;
        }
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("property ") {
            let name = rest.trim_end_matches(';').trim().to_string();
            current = Some((name, None, Vec::new(), None));
            continue;
        }
        if line == "endproperty" {
            let (name, antecedent, terms, budget) =
                current.take().ok_or_else(|| err("endproperty without property".to_string()))?;
            let class = class.ok_or_else(|| err("missing '// class:' header".to_string()))?;
            if terms.is_empty() {
                return Err(PropgenError::EmptyConsequent(name));
            }
            props.push(PropertyIR {
                class,
                name,
                antecedent: antecedent.ok_or_else(|| err("missing antecedent".to_string()))?,
                terms,
                fault_budget: budget,
            });
            continue;
        }
        if line.starts_with("assert_") {
            continue;
        }
        if let Some((_, antecedent, terms, _)) = current.as_mut() {
            if let Some(ant_text) = line.strip_suffix("|->") {
                *antecedent = Some(parse_antecedent(ant_text.trim()));
                continue;
            }
            let term_text = line.trim_end_matches([';', '&', ' ']).trim();
            if term_text.is_empty() {
                continue;
            }
            terms.push(parse_term(term_text).map_err(err)?);
        }
    }
    Ok(props)
}

fn parse_antecedent(text: &str) -> Antecedent {
    if text == "1" {
        Antecedent::Always
    } else if let Some(name) = text.strip_prefix('`') {
        Antecedent::Macro(name.to_string())
    } else {
        Antecedent::Signal(text.to_string())
    }
}

fn parse_term(text: &str) -> Result<Term, String> {
    let (kind, rest) = if let Some(rest) = text.strip_prefix("##1 ") {
        (TermKind::NextCycle, rest)
    } else if let Some(rest) = text.strip_prefix("##[1:") {
        let (n, tail) =
            rest.split_once("] ").ok_or_else(|| format!("bad window in '{}'", text))?;
        let n: u32 = n.parse().map_err(|_| format!("bad window in '{}'", text))?;
        (TermKind::Within(n), tail)
    } else {
        (TermKind::Immediate, text)
    };
    let (lhs, rhs) = rest.split_once("==").ok_or_else(|| format!("no '==' in '{}'", text))?;
    Ok(Term { kind, lhs: parse_expr(lhs.trim())?, rhs: parse_expr(rhs.trim())? })
}

fn parse_expr(text: &str) -> Result<Expr, String> {
    if let Some(inner) = text.strip_prefix("$past(").and_then(|t| t.strip_suffix(')')) {
        return Ok(Expr::Past(Box::new(parse_expr(inner)?)));
    }
    if let Some(name) = text.strip_prefix('`') {
        return Ok(Expr::MacroRef(name.to_string()));
    }
    if let Ok(v) = text.parse::<u64>() {
        return Ok(Expr::Int(v));
    }
    if let Some((path, range)) = text.split_once('[') {
        let range = range.strip_suffix(']').ok_or_else(|| format!("bad slice '{}'", text))?;
        let (m, l) = range.split_once(':').ok_or_else(|| format!("bad slice '{}'", text))?;
        return Ok(Expr::Signal {
            path: path.to_string(),
            msb: Some(m.trim().parse().map_err(|_| format!("bad msb '{}'", m))?),
            lsb: Some(l.trim().parse().map_err(|_| format!("bad lsb '{}'", l))?),
        });
    }
    Ok(Expr::signal(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{pack, CostTable};
    use crate::spec_model::parse_spec;

    const REF_XML: &str = crate::optimizer::tests::REF_XML;

    fn ref_design(alg: OptimizeAlgorithm) -> (ModelOfThings, MergePlan) {
        let mot = parse_spec(REF_XML).unwrap();
        let plan = pack(&mot, alg, &CostTable::builtin_paper(32)).unwrap();
        (mot, plan)
    }

    fn dw_terms(props: &[PropertyIR]) -> Vec<(String, u64)> {
        props[0]
            .terms
            .iter()
            .filter_map(|t| match (&t.lhs, &t.rhs) {
                (Expr::Signal { path, .. }, Expr::Int(v)) if path.ends_with(".dw") => {
                    Some((path.clone(), *v))
                }
                _ => None,
            })
            .collect()
    }

    #[test]
    fn parameter_props_match_reference_listing() {
        let (mot, plan) = ref_design(OptimizeAlgorithm::None);
        let props = gen_parameter_props(&mot, &plan);
        assert_eq!(props.len(), 1);
        assert_eq!(
            dw_terms(&props),
            vec![
                ("sff_wrapper_1.dw".to_string(), 2),
                ("sff_wrapper_2.dw".to_string(), 2),
                ("sff_wrapper_3.dw".to_string(), 30),
            ]
        );

        let (mot, plan) = ref_design(OptimizeAlgorithm::Bfd);
        let props = gen_parameter_props(&mot, &plan);
        assert_eq!(
            dw_terms(&props),
            vec![("sff_wrapper_1.dw".to_string(), 32), ("sff_wrapper_2.dw".to_string(), 2)]
        );

        let (mot, plan) = ref_design(OptimizeAlgorithm::Ilp);
        let props = gen_parameter_props(&mot, &plan);
        assert_eq!(
            dw_terms(&props),
            vec![("sff_wrapper_1.dw".to_string(), 17), ("sff_wrapper_2.dw".to_string(), 17)]
        );
    }

    #[test]
    fn safety_prop_counts_match_reference() {
        let (mot, plan) = ref_design(OptimizeAlgorithm::None);
        assert_eq!(gen_safety_props(&mot, &plan).len(), 3);
        let (mot, plan) = ref_design(OptimizeAlgorithm::Bfd);
        let props = gen_safety_props(&mot, &plan);
        assert_eq!(props.len(), 2);
        assert_eq!(props[0].fault_budget, Some(2));
        assert_eq!(props[0].antecedent, Antecedent::Macro("Fault_Injection_1".into()));
        let (mot, plan) = ref_design(OptimizeAlgorithm::Ilp);
        assert_eq!(gen_safety_props(&mot, &plan).len(), 2);
    }

    #[test]
    fn connectivity_props_match_reference_listing() {
        let (mot, plan) = ref_design(OptimizeAlgorithm::Ilp);
        let props = gen_connectivity_props(&mot, &plan);
        assert_eq!(props.len(), 2);
        let data_terms: Vec<String> = props[0]
            .terms
            .iter()
            .filter(|t| matches!(&t.lhs, Expr::Signal { msb: Some(_), .. }))
            .map(|t| t.render())
            .collect();
        assert_eq!(
            data_terms,
            vec![
                "top.c_i[16:0] == sff_wrapper_1.d_i[16:0]",
                "top.c_i[29:17] == sff_wrapper_2.d_i[12:0]",
                "top.a_i[1:0] == sff_wrapper_2.d_i[14:13]",
                "top.b_i[1:0] == sff_wrapper_2.d_i[16:15]",
            ]
        );
        let out_terms: Vec<String> = props[1]
            .terms
            .iter()
            .filter(|t| matches!(&t.lhs, Expr::Signal { msb: Some(_), .. }))
            .map(|t| t.render())
            .collect();
        assert_eq!(
            out_terms,
            vec![
                "sff_wrapper_1.d_o[16:0] == top.c_o[16:0]",
                "sff_wrapper_2.d_o[12:0] == top.c_o[29:17]",
                "sff_wrapper_2.d_o[14:13] == top.a_o[1:0]",
                "sff_wrapper_2.d_o[16:15] == top.b_o[1:0]",
            ]
        );
    }

    #[test]
    fn coverage_connectivity_terms_reference_every_protected_bit() {
        for alg in [OptimizeAlgorithm::None, OptimizeAlgorithm::Bfd, OptimizeAlgorithm::Ilp] {
            let (mot, plan) = ref_design(alg);
            let props = gen_connectivity_props(&mot, &plan);
            let mut covered: BTreeMap<String, Vec<bool>> = mot
                .registers
                .iter()
                .map(|r| (format!("{}.{}_i", mot.block_name, r.name), vec![false; r.width as usize]))
                .collect();
            for t in &props[0].terms {
                if let Expr::Signal { path, msb: Some(m), lsb: Some(l) } = &t.lhs {
                    let mask = covered.get_mut(path).unwrap();
                    for b in *l..=*m {
                        assert!(!mask[b as usize], "bit referenced twice");
                        mask[b as usize] = true;
                    }
                }
            }
            let total: usize =
                covered.values().map(|m| m.iter().filter(|&&b| b).count()).sum();
            assert_eq!(total as u64, mot.protected_bits());
        }
    }

    #[test]
    fn count_laws() {
        for alg in [OptimizeAlgorithm::None, OptimizeAlgorithm::Bfd, OptimizeAlgorithm::Ilp] {
            let (mot, plan) = ref_design(alg);
            assert_eq!(gen_parameter_props(&mot, &plan).len(), 1);
            assert_eq!(gen_safety_props(&mot, &plan).len(), plan.wrappers.len());
            assert_eq!(gen_connectivity_props(&mot, &plan).len(), 2);
            assert_eq!(gen_normal_props(&mot, &plan).len(), plan.wrappers.len());
            assert_eq!(gen_selftest_props(&mot, &plan).len(), 0); // selftest=false everywhere
        }
    }

    #[test]
    fn selftest_props_follow_compat_key() {
        let xml = REF_XML.replace("selftest=\"false\"", "selftest=\"true\"");
        let mot = parse_spec(&xml).unwrap();
        let plan = pack(&mot, OptimizeAlgorithm::Ilp, &CostTable::builtin_paper(32)).unwrap();
        let props = gen_selftest_props(&mot, &plan);
        assert_eq!(props.len(), plan.wrappers.len());
        assert!(plan.wrappers.iter().all(|w| w.self_test));
    }

    #[test]
    fn empty_protections_generate_no_per_wrapper_props() {
        let mot = parse_spec(r#"<block name="top"><register name="x" width="8"/></block>"#).unwrap();
        let plan = pack(&mot, OptimizeAlgorithm::None, &CostTable::builtin_linear(32)).unwrap();
        assert!(gen_safety_props(&mot, &plan).is_empty());
        assert!(gen_parameter_props(&mot, &plan).is_empty());
        let files = emit_sva(&generate_all(&mot, &plan), &mot, &plan);
        let safety = &files["top_safety.sva"];
        assert!(safety.lines().all(|l| l.is_empty() || l.starts_with("//")));
    }

    #[test]
    fn emission_is_deterministic() {
        let (mot, plan) = ref_design(OptimizeAlgorithm::Ilp);
        let props = generate_all(&mot, &plan);
        let a = emit_sva(&props, &mot, &plan);
        let b = emit_sva(&generate_all(&mot, &plan), &mot, &plan);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6); // five classes + macros
    }

    #[test]
    fn emitted_text_contains_reference_listing_lines() {
        let (mot, plan) = ref_design(OptimizeAlgorithm::Ilp);
        let files = emit_sva(&generate_all(&mot, &plan), &mot, &plan);
        let params = &files["top_params.sva"];
        assert!(params.contains("sff_wrapper_1.dw == 17 &&"));
        assert!(params.contains("sff_wrapper_2.dw == 17;"));
        let conn = &files["top_conn.sva"];
        assert!(conn.contains("top.c_i[29:17] == sff_wrapper_2.d_i[12:0] &&"));
        assert!(conn.contains("sff_wrapper_2.d_o[16:15] == top.b_o[1:0];"));

        let (mot, plan) = ref_design(OptimizeAlgorithm::Bfd);
        let files = emit_sva(&generate_all(&mot, &plan), &mot, &plan);
        assert!(files["top_conn.sva"].contains("sff_wrapper_1.d_o[31:30] == top.a_o[1:0]"));
    }

    #[test]
    fn render_parse_round_trip() {
        for alg in [OptimizeAlgorithm::None, OptimizeAlgorithm::Bfd, OptimizeAlgorithm::Ilp] {
            let (mot, plan) = ref_design(alg);
            let props = generate_all(&mot, &plan);
            validate_props(&props, &plan).unwrap();
            let files = emit_sva(&props, &mot, &plan);
            let mut parsed = Vec::new();
            for (name, text) in &files {
                if name.ends_with(".sva") {
                    parsed.extend(parse_sva(text).unwrap());
                }
            }
            // Files iterate in name order; compare property-by-property.
            let mut expected = props.clone();
            expected.sort_by(|a, b| a.name.cmp(&b.name));
            parsed.sort_by(|a, b| a.name.cmp(&b.name));
            assert_eq!(parsed, expected);
        }
    }
}
