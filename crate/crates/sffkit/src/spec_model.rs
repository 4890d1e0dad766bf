//! Register-safety specification model: XML parsing into a validated
//! Model of Things (MoT) plus generator options.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Register protection methods supported by the safety flip-flop library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtectionMethod {
    Parity,
    Ded,
    Secded,
    Dmr,
    Tmr,
}

impl ProtectionMethod {
    /// Maximum number of injected faults the method is guaranteed to flag.
    pub fn max_detectable_errors(self) -> u32 {
        match self {
            ProtectionMethod::Parity => 1,
            ProtectionMethod::Ded => 2,
            ProtectionMethod::Secded => 2,
            ProtectionMethod::Dmr => 1,
            ProtectionMethod::Tmr => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtectionMethod::Parity => "parity",
            ProtectionMethod::Ded => "ded",
            ProtectionMethod::Secded => "secded",
            ProtectionMethod::Dmr => "dmr",
            ProtectionMethod::Tmr => "tmr",
        }
    }

    /// Stable integer id used in generated parameter properties.
    pub fn id(self) -> u32 {
        match self {
            ProtectionMethod::Parity => 0,
            ProtectionMethod::Ded => 1,
            ProtectionMethod::Secded => 2,
            ProtectionMethod::Dmr => 3,
            ProtectionMethod::Tmr => 4,
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "parity" => Some(ProtectionMethod::Parity),
            "ded" => Some(ProtectionMethod::Ded),
            "secded" => Some(ProtectionMethod::Secded),
            "dmr" => Some(ProtectionMethod::Dmr),
            "tmr" => Some(ProtectionMethod::Tmr),
            _ => None,
        }
    }
}

impl fmt::Display for ProtectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The five generated property classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyClass {
    Parameters,
    SafetyMode,
    Connectivity,
    NormalMode,
    SelfTest,
}

impl PropertyClass {
    pub const ALL: [PropertyClass; 5] = [
        PropertyClass::Parameters,
        PropertyClass::SafetyMode,
        PropertyClass::Connectivity,
        PropertyClass::NormalMode,
        PropertyClass::SelfTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyClass::Parameters => "parameters",
            PropertyClass::SafetyMode => "safety",
            PropertyClass::Connectivity => "connectivity",
            PropertyClass::NormalMode => "normal",
            PropertyClass::SelfTest => "selftest",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "parameters" | "params" => Some(PropertyClass::Parameters),
            "safety" | "safety_mode" => Some(PropertyClass::SafetyMode),
            "connectivity" | "conn" => Some(PropertyClass::Connectivity),
            "normal" | "normal_mode" => Some(PropertyClass::NormalMode),
            "selftest" | "self_test" => Some(PropertyClass::SelfTest),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizeAlgorithm {
    None,
    Bfd,
    Ilp,
}

impl OptimizeAlgorithm {
    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(OptimizeAlgorithm::None),
            "bfd" => Some(OptimizeAlgorithm::Bfd),
            "ilp" => Some(OptimizeAlgorithm::Ilp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizeAlgorithm::None => "none",
            OptimizeAlgorithm::Bfd => "bfd",
            OptimizeAlgorithm::Ilp => "ilp",
        }
    }
}

/// Origin of the per-width area cost table used by the ILP packer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostTableRef {
    BuiltinLinear,
    BuiltinPaper,
    Path(String),
}

impl CostTableRef {
    #[allow(clippy::should_implement_trait)] // infallible, unlike FromStr
    pub fn from_str(s: &str) -> Self {
        match s {
            "builtin-linear" => CostTableRef::BuiltinLinear,
            "builtin-paper" => CostTableRef::BuiltinPaper,
            other => CostTableRef::Path(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSpec {
    pub name: String,
    pub width: u32,
    pub reset_value: BigUint,
    pub declaration_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedRange {
    pub register: String,
    pub msb: u32,
    pub lsb: u32,
    pub method: ProtectionMethod,
    pub self_test: bool,
    pub clock_domain: String,
    pub reset_domain: String,
}

impl ProtectedRange {
    pub fn width(&self) -> u32 {
        self.msb - self.lsb + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub algorithm: OptimizeAlgorithm,
    pub max_merged_width: u32,
    pub cost_table: CostTableRef,
    pub emit_classes: BTreeSet<PropertyClass>,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            algorithm: OptimizeAlgorithm::None,
            max_merged_width: 32,
            cost_table: CostTableRef::BuiltinLinear,
            emit_classes: PropertyClass::ALL.iter().copied().collect(),
        }
    }
}

/// The extracted specification instance: one register block plus options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOfThings {
    pub block_name: String,
    pub clock: String,
    pub reset: String,
    pub registers: Vec<RegisterSpec>,
    pub protections: Vec<ProtectedRange>,
    pub options: GeneratorOptions,
}

impl ModelOfThings {
    pub fn register(&self, name: &str) -> Option<&RegisterSpec> {
        self.registers.iter().find(|r| r.name == name)
    }

    /// Total number of protected bits over all ranges.
    pub fn protected_bits(&self) -> u64 {
        self.protections.iter().map(|p| p.width() as u64).sum()
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("MoT is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        serde_json::from_str(text).map_err(|e| SpecError::Json(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("line {line}: malformed XML: {message}")]
    Xml { line: u32, message: String },
    #[error("line {line}: missing {what}")]
    MissingItem { line: u32, what: String },
    #[error("line {line}: invalid value for {what}: {value}")]
    InvalidValue { line: u32, what: String, value: String },
    #[error("line {line}: unknown protection method '{name}'")]
    UnknownMethod { line: u32, name: String },
    #[error("line {line}: protection range {msb}:{lsb} exceeds width {width} of register '{register}'")]
    RangeExceedsWidth { line: u32, register: String, msb: u32, lsb: u32, width: u32 },
    #[error("line {line}: overlapping protection ranges on register '{register}'")]
    OverlappingRanges { line: u32, register: String },
    #[error("line {line}: register '{register}' has multiple protections but optimization is disabled")]
    MultipleProtections { line: u32, register: String },
    #[error("line {line}: duplicate register name '{name}'")]
    DuplicateRegister { line: u32, name: String },
    #[error("line {line}: max_width {max_width} is smaller than the widest protected range ({widest} bits)")]
    MaxWidthTooSmall { line: u32, max_width: u32, widest: u32 },
    #[error("invalid MoT JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A validation finding with severity and a human-readable location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {}: {}", sev, self.location, self.message)
    }
}

/// Parses the XML register-safety specification into a validated MoT.
///
/// Element document order is preserved as `declaration_index`, which is the
/// tie-breaker for all downstream determinism.
pub fn parse_spec(xml_text: &str) -> Result<ModelOfThings, SpecError> {
    let doc = roxmltree::Document::parse(xml_text).map_err(|e| SpecError::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let line_of = |node: &roxmltree::Node| doc.text_pos_at(node.range().start).row;

    let block = doc.root_element();
    if block.tag_name().name() != "block" {
        return Err(SpecError::MissingItem { line: line_of(&block), what: "<block> root element".into() });
    }
    let req_attr = |node: &roxmltree::Node, name: &str| -> Result<String, SpecError> {
        node.attribute(name)
            .map(str::to_string)
            .ok_or_else(|| SpecError::MissingItem {
                line: line_of(node),
                what: format!("attribute '{}' on <{}>", name, node.tag_name().name()),
            })
    };

    let block_name = req_attr(&block, "name")?;
    let clock = block.attribute("clock").unwrap_or("clk").to_string();
    let reset = block.attribute("reset").unwrap_or("rst_n").to_string();

    let mut registers = Vec::new();
    let mut protections = Vec::new();
    let mut options = GeneratorOptions::default();
    let mut decl_index = 0usize;

    for child in block.children().filter(|c| c.is_element()) {
        match child.tag_name().name() {
            "register" => {
                let name = req_attr(&child, "name")?;
                if registers.iter().any(|r: &RegisterSpec| r.name == name) {
                    return Err(SpecError::DuplicateRegister { line: line_of(&child), name });
                }
                let width: u32 = req_attr(&child, "width")?.parse().map_err(|_| SpecError::InvalidValue {
                    line: line_of(&child),
                    what: "width".into(),
                    value: child.attribute("width").unwrap_or("").into(),
                })?;
                if width == 0 || width > 1024 {
                    return Err(SpecError::InvalidValue {
                        line: line_of(&child),
                        what: "width (must be 1..1024)".into(),
                        value: width.to_string(),
                    });
                }
                let reset_value_text = child.attribute("reset_value").unwrap_or("0");
                let reset_value: BigUint =
                    reset_value_text.parse().map_err(|_| SpecError::InvalidValue {
                        line: line_of(&child),
                        what: "reset_value".into(),
                        value: reset_value_text.into(),
                    })?;
                if reset_value.bits() > width as u64 {
                    return Err(SpecError::InvalidValue {
                        line: line_of(&child),
                        what: format!("reset_value (must fit in {} bits)", width),
                        value: reset_value_text.into(),
                    });
                }

                for p in child.children().filter(|c| c.is_element()) {
                    if p.tag_name().name() != "protect" {
                        return Err(SpecError::InvalidValue {
                            line: line_of(&p),
                            what: "child of <register>".into(),
                            value: p.tag_name().name().into(),
                        });
                    }
                    let range_text = req_attr(&p, "range")?;
                    let (msb, lsb) = parse_range(&range_text).ok_or_else(|| SpecError::InvalidValue {
                        line: line_of(&p),
                        what: "range (expected 'msb:lsb')".into(),
                        value: range_text.clone(),
                    })?;
                    if msb >= width {
                        return Err(SpecError::RangeExceedsWidth {
                            line: line_of(&p),
                            register: name.clone(),
                            msb,
                            lsb,
                            width,
                        });
                    }
                    let method_text = req_attr(&p, "method")?;
                    let method = ProtectionMethod::from_name(&method_text).ok_or_else(|| {
                        SpecError::UnknownMethod { line: line_of(&p), name: method_text.clone() }
                    })?;
                    let self_test = match p.attribute("selftest").unwrap_or("false") {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(SpecError::InvalidValue {
                                line: line_of(&p),
                                what: "selftest".into(),
                                value: other.into(),
                            })
                        }
                    };
                    let range = ProtectedRange {
                        register: name.clone(),
                        msb,
                        lsb,
                        method,
                        self_test,
                        clock_domain: p.attribute("clock").unwrap_or(&clock).to_string(),
                        reset_domain: p.attribute("reset").unwrap_or(&reset).to_string(),
                    };
                    if protections
                        .iter()
                        .filter(|q: &&ProtectedRange| q.register == name)
                        .any(|q| range.lsb <= q.msb && q.lsb <= range.msb)
                    {
                        return Err(SpecError::OverlappingRanges {
                            line: line_of(&p),
                            register: name.clone(),
                        });
                    }
                    protections.push(range);
                }
                registers.push(RegisterSpec { name, width, reset_value, declaration_index: decl_index });
                decl_index += 1;
            }
            "options" => {
                if let Some(alg) = child.attribute("optimize") {
                    options.algorithm =
                        OptimizeAlgorithm::from_name(alg).ok_or_else(|| SpecError::InvalidValue {
                            line: line_of(&child),
                            what: "optimize".into(),
                            value: alg.into(),
                        })?;
                }
                if let Some(mw) = child.attribute("max_width") {
                    options.max_merged_width = mw.parse().map_err(|_| SpecError::InvalidValue {
                        line: line_of(&child),
                        what: "max_width".into(),
                        value: mw.into(),
                    })?;
                }
                if let Some(ct) = child.attribute("cost_table") {
                    options.cost_table = CostTableRef::from_str(ct);
                }
                if let Some(classes) = child.attribute("classes") {
                    let mut set = BTreeSet::new();
                    for part in classes.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let class = PropertyClass::from_name(part).ok_or_else(|| {
                            SpecError::InvalidValue {
                                line: line_of(&child),
                                what: "classes".into(),
                                value: part.into(),
                            }
                        })?;
                        set.insert(class);
                    }
                    options.emit_classes = set;
                }
            }
            other => {
                return Err(SpecError::InvalidValue {
                    line: line_of(&child),
                    what: "child of <block>".into(),
                    value: other.into(),
                })
            }
        }
    }

    // Mode-dependent structural rules that still fail extraction.
    if options.algorithm == OptimizeAlgorithm::None {
        for r in &registers {
            if protections.iter().filter(|p| p.register == r.name).count() > 1 {
                return Err(SpecError::MultipleProtections { line: 1, register: r.name.clone() });
            }
        }
    }
    if let Some(widest) = protections.iter().map(ProtectedRange::width).max() {
        if widest > options.max_merged_width {
            return Err(SpecError::MaxWidthTooSmall {
                line: 1,
                max_width: options.max_merged_width,
                widest,
            });
        }
    }

    Ok(ModelOfThings { block_name, clock, reset, registers, protections, options })
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    let (m, l) = s.split_once(':')?;
    let msb: u32 = m.trim().parse().ok()?;
    let lsb: u32 = l.trim().parse().ok()?;
    if lsb <= msb {
        Some((msb, lsb))
    } else {
        None
    }
}

/// Checks every MoT invariant and returns a diagnostic per violation.
/// An empty list means the model is valid.
pub fn validate_mot(mot: &ModelOfThings) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = BTreeSet::new();
    for r in &mot.registers {
        if !seen.insert(r.name.clone()) {
            diags.push(Diagnostic::error(
                format!("register {}", r.name),
                format!("duplicate register name '{}'", r.name),
            ));
        }
        if r.width == 0 {
            diags.push(Diagnostic::error(format!("register {}", r.name), "width must be >= 1"));
        } else if r.reset_value.bits() > r.width as u64 {
            diags.push(Diagnostic::error(
                format!("register {}", r.name),
                format!("reset_value does not fit in {} bits", r.width),
            ));
        }
    }
    for (i, p) in mot.protections.iter().enumerate() {
        let loc = format!("protect {}[{}:{}]", p.register, p.msb, p.lsb);
        match mot.register(&p.register) {
            None => {
                diags.push(Diagnostic::error(&loc, format!("unknown register '{}'", p.register)));
                continue;
            }
            Some(r) => {
                if p.msb >= r.width {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("range exceeds register width {}", r.width),
                    ));
                }
            }
        }
        for q in &mot.protections[..i] {
            if q.register == p.register && p.lsb <= q.msb && q.lsb <= p.msb {
                diags.push(Diagnostic::error(&loc, "overlaps an earlier protection range"));
            }
        }
        if p.width() > mot.options.max_merged_width {
            diags.push(Diagnostic::error(
                &loc,
                format!(
                    "protected range is {} bits but max_width is {}",
                    p.width(),
                    mot.options.max_merged_width
                ),
            ));
        }
    }
    if mot.options.algorithm == OptimizeAlgorithm::None {
        for r in &mot.registers {
            if mot.protections.iter().filter(|p| p.register == r.name).count() > 1 {
                diags.push(Diagnostic::error(
                    format!("register {}", r.name),
                    "multiple protections on one register require optimization",
                ));
            }
        }
    }
    diags
}
