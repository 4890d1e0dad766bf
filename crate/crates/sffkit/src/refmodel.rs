//! Cycle-based behavioral model of the safety structure (wrappers, alarm
//! reduction, controller) plus a bounded property checker and a mutation
//! injector. This is the desk-scale stand-in for a commercial formal tool.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::ecc::{self, CodeGeometry, DecodeStatus};
use crate::optimizer::{MergePlan, SliceMapEntry, WrapperSpec};
use crate::propgen::{Expr, PropertyIR, Term, TermKind};
use crate::spec_model::{ModelOfThings, PropertyClass, ProtectionMethod};

pub const DEFAULT_SEED: u64 = 0x5ff_c0de;

#[derive(Debug, Error)]
pub enum RefModelError {
    #[error("plan/model mismatch: {0}")]
    PlanMismatch(String),
    #[error("unknown signal reference '{0}'")]
    UnknownSignal(String),
    #[error("mutation {kind:?} not applicable: {reason}")]
    MutationInapplicable { kind: MutationKind, reason: String },
    #[error(transparent)]
    Ecc(#[from] ecc::EccError),
}

/// Bounds for the property checker.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CheckBudget {
    /// Exhaustive (state, fault) enumeration up to this codeword width.
    pub exhaustive_bit_limit: u32,
    /// Exhaustive data sweep for normal-mode checks up to this data width.
    pub exhaustive_data_limit: u32,
    /// Sample count when a sweep falls back to seeded randomization.
    pub random_samples: u32,
    pub seed: u64,
}

impl Default for CheckBudget {
    fn default() -> Self {
        CheckBudget {
            exhaustive_bit_limit: 13,
            exhaustive_data_limit: 8,
            random_samples: 256,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestState {
    Idle,
    Running,
    Done,
}

/// One elaborated safety register.
#[derive(Debug, Clone)]
pub struct WrapperState {
    pub spec: WrapperSpec,
    pub geometry: CodeGeometry,
    /// Net actually driving the wrapper clock; equals the spec clock domain
    /// unless miswired.
    pub clock_net: String,
    pub reset_net: String,
    pub stored: Bits,
    pub fault_mask: Bits,
    pub err_out: bool,
    pub test_state: TestState,
    saved_for_test: Option<Bits>,
}

impl WrapperState {
    fn new(spec: &WrapperSpec) -> Result<Self, RefModelError> {
        let geometry = CodeGeometry::new(spec.method, spec.data_width)?;
        Ok(WrapperState {
            spec: spec.clone(),
            clock_net: spec.clock_domain.clone(),
            reset_net: spec.reset_domain.clone(),
            stored: Bits::zeros(geometry.total_width() as usize),
            fault_mask: Bits::zeros(geometry.total_width() as usize),
            err_out: false,
            test_state: TestState::Idle,
            saved_for_test: None,
            geometry,
        })
    }

    /// Encodes `data` into the stored codeword layout of this method.
    pub fn encode(&self, data: &Bits) -> Result<Bits, RefModelError> {
        assert_eq!(data.len() as u32, self.geometry.data_width);
        Ok(match self.spec.method {
            ProtectionMethod::Parity => ecc::parity_encode(data)?,
            ProtectionMethod::Ded => ecc::ded_encode(data)?,
            ProtectionMethod::Secded => ecc::secded_encode(data)?,
            ProtectionMethod::Dmr => data.concat(data),
            ProtectionMethod::Tmr => data.concat(data).concat(data),
        })
    }

    /// Decodes a (possibly faulted) codeword into output data and status.
    pub fn decode(&self, codeword: &Bits) -> Result<(Bits, DecodeStatus), RefModelError> {
        let d = self.geometry.data_width as usize;
        Ok(match self.spec.method {
            ProtectionMethod::Parity => ecc::parity_check(codeword)?,
            ProtectionMethod::Ded => ecc::ded_check(codeword)?,
            ProtectionMethod::Secded => ecc::secded_decode(codeword)?,
            ProtectionMethod::Dmr => {
                let a = codeword.slice(d - 1, 0);
                let b = codeword.slice(2 * d - 1, d);
                ecc::dmr_check(&a, &b)?
            }
            ProtectionMethod::Tmr => {
                let a = codeword.slice(d - 1, 0);
                let b = codeword.slice(2 * d - 1, d);
                let c = codeword.slice(3 * d - 1, 2 * d);
                ecc::tmr_vote(&a, &b, &c)?
            }
        })
    }

    /// Write `data`, overlay `fault_mask`, decode: the single-cycle response
    /// a fault-injection case observes.
    pub fn write_and_observe(
        &self,
        data: &Bits,
        fault_mask: &Bits,
    ) -> Result<(Bits, DecodeStatus), RefModelError> {
        let stored = self.encode(data)?;
        self.decode(&stored.xor(fault_mask))
    }
}

/// OR-reduction of wrapper alarms within one clock domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlarmNode {
    pub clock_domain: String,
    pub wrapper_instances: Vec<String>,
    pub reduced_alarm: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerState {
    pub error_flag_to_smu: bool,
    pub test_trigger: bool,
}

/// The elaborated design: wrappers, wiring, alarm tree, controller.
#[derive(Debug, Clone)]
pub struct SafetyStructure {
    pub block_name: String,
    pub clock: String,
    pub reset: String,
    pub register_widths: BTreeMap<String, u32>,
    pub wrappers: Vec<WrapperState>,
    pub wiring: Vec<SliceMapEntry>,
    pub alarms: Vec<AlarmNode>,
    pub controller: ControllerState,
}

impl SafetyStructure {
    pub fn wrapper(&self, instance: &str) -> Option<&WrapperState> {
        self.wrappers.iter().find(|w| w.spec.instance == instance)
    }

}

/// Builds the safety structure for a model and its merge plan.
pub fn elaborate(mot: &ModelOfThings, plan: &MergePlan) -> Result<SafetyStructure, RefModelError> {
    for e in &plan.mapping {
        let reg = mot.register(&e.source_register).ok_or_else(|| {
            RefModelError::PlanMismatch(format!("plan references unknown register '{}'", e.source_register))
        })?;
        if e.source_msb >= reg.width {
            return Err(RefModelError::PlanMismatch(format!(
                "slice {}[{}:{}] exceeds register width {}",
                e.source_register, e.source_msb, e.source_lsb, reg.width
            )));
        }
        if plan.wrapper(&e.wrapper).is_none() {
            return Err(RefModelError::PlanMismatch(format!(
                "mapping references unknown wrapper '{}'",
                e.wrapper
            )));
        }
    }
    let mapped: u64 = plan.mapping.iter().map(|e| e.width() as u64).sum();
    let dw_sum: u64 = plan.wrappers.iter().map(|w| w.data_width as u64).sum();
    if mapped != dw_sum {
        return Err(RefModelError::PlanMismatch(format!(
            "mapped bits {} != total wrapper width {}",
            mapped, dw_sum
        )));
    }

    let wrappers: Vec<WrapperState> =
        plan.wrappers.iter().map(WrapperState::new).collect::<Result<_, _>>()?;

    // One alarm node per clock domain, in first-appearance order.
    let mut alarms: Vec<AlarmNode> = Vec::new();
    for w in &wrappers {
        match alarms.iter_mut().find(|a| a.clock_domain == w.spec.clock_domain) {
            Some(a) => a.wrapper_instances.push(w.spec.instance.clone()),
            None => alarms.push(AlarmNode {
                clock_domain: w.spec.clock_domain.clone(),
                wrapper_instances: vec![w.spec.instance.clone()],
                reduced_alarm: false,
            }),
        }
    }

    Ok(SafetyStructure {
        block_name: mot.block_name.clone(),
        clock: mot.clock.clone(),
        reset: mot.reset.clone(),
        register_widths: mot.registers.iter().map(|r| (r.name.clone(), r.width)).collect(),
        wrappers,
        wiring: plan.mapping.clone(),
        alarms,
        controller: ControllerState { error_flag_to_smu: false, test_trigger: false },
    })
}

/// Top-level port valuation for one cycle.
#[derive(Debug, Clone, Default)]
pub struct StepInputs {
    pub reg_inputs: BTreeMap<String, Bits>,
    pub write_enable: bool,
    /// Per-wrapper fault masks over the stored codeword.
    pub fault_inject: BTreeMap<String, Bits>,
    pub test_trigger: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutputs {
    pub reg_outputs: BTreeMap<String, Bits>,
    pub wrapper_err: BTreeMap<String, bool>,
    pub error_flag_to_smu: bool,
    pub test_done: BTreeMap<String, bool>,
}

/// Synchronous single-cycle semantics: write-enabled wrappers encode and
/// store; fault masks overlay the stored codeword before decode; decode
/// drives data outputs and err_o; alarms and the controller update
/// combinationally.
pub fn step(structure: &mut SafetyStructure, inputs: &StepInputs) -> Result<StepOutputs, RefModelError> {
    let wiring = structure.wiring.clone();
    let mut reg_outputs: BTreeMap<String, Bits> = structure
        .register_widths
        .iter()
        .map(|(name, &w)| (name.clone(), Bits::zeros(w as usize)))
        .collect();
    let mut wrapper_err = BTreeMap::new();
    let mut test_done = BTreeMap::new();

    for wi in 0..structure.wrappers.len() {
        let instance = structure.wrappers[wi].spec.instance.clone();
        let dw = structure.wrappers[wi].geometry.data_width as usize;

        if inputs.write_enable {
            // Gather d_i through the input wiring; unwired bits read 0.
            let mut d_in = Bits::zeros(dw);
            for e in wiring.iter().filter(|e| e.wrapper == instance) {
                if let Some(src) = inputs.reg_inputs.get(&e.source_register) {
                    d_in.splice(e.dest_lsb as usize, &src.slice(e.source_msb as usize, e.source_lsb as usize));
                }
            }
            let encoded = structure.wrappers[wi].encode(&d_in)?;
            structure.wrappers[wi].stored = encoded;
        }
        if let Some(mask) = inputs.fault_inject.get(&instance) {
            if mask.len() != structure.wrappers[wi].stored.len() {
                return Err(RefModelError::PlanMismatch(format!(
                    "fault mask width {} != codeword width {} on {}",
                    mask.len(),
                    structure.wrappers[wi].stored.len(),
                    instance
                )));
            }
            structure.wrappers[wi].fault_mask = mask.clone();
        }

        // Self-test sequencer: trigger -> Running (internal fault visible,
        // err pulses) -> Done (state restored, test_done_o high).
        let mut test_fault = Bits::zeros(structure.wrappers[wi].stored.len());
        match structure.wrappers[wi].test_state {
            TestState::Idle => {
                if inputs.test_trigger && structure.wrappers[wi].spec.self_test {
                    structure.wrappers[wi].saved_for_test = Some(structure.wrappers[wi].stored.clone());
                    structure.wrappers[wi].test_state = TestState::Running;
                }
            }
            TestState::Running => {
                test_fault.flip(0);
                if let Some(saved) = structure.wrappers[wi].saved_for_test.take() {
                    structure.wrappers[wi].stored = saved;
                }
                structure.wrappers[wi].test_state = TestState::Done;
            }
            TestState::Done => {
                structure.wrappers[wi].test_state = TestState::Idle;
            }
        }
        // A Running wrapper observes its internal test fault this cycle.
        if structure.wrappers[wi].test_state == TestState::Done {
            // fault was injected while transitioning Running -> Done above
        }

        let effective = structure.wrappers[wi]
            .stored
            .xor(&structure.wrappers[wi].fault_mask)
            .xor(&test_fault);
        let (data, status) = structure.wrappers[wi].decode(&effective)?;
        structure.wrappers[wi].err_out = status.is_error();
        wrapper_err.insert(instance.clone(), status.is_error());
        test_done.insert(instance.clone(), structure.wrappers[wi].test_state == TestState::Done);

        // Scatter d_o through the output wiring.
        for e in wiring.iter().filter(|e| e.wrapper == instance) {
            if let Some(dst) = reg_outputs.get_mut(&e.source_register) {
                dst.splice(e.source_lsb as usize, &data.slice(e.dest_msb as usize, e.dest_lsb as usize));
            }
        }
    }

    for alarm in &mut structure.alarms {
        alarm.reduced_alarm = alarm
            .wrapper_instances
            .iter()
            .any(|i| wrapper_err.get(i).copied().unwrap_or(false));
    }
    structure.controller.test_trigger = inputs.test_trigger;
    structure.controller.error_flag_to_smu = structure.alarms.iter().any(|a| a.reduced_alarm);

    Ok(StepOutputs {
        reg_outputs,
        wrapper_err,
        error_flag_to_smu: structure.controller.error_flag_to_smu,
        test_done,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub cycle: u64,
    pub signal: String,
    pub value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub property_name: String,
    pub class: PropertyClass,
    pub verdict: Verdict,
    pub trace: Vec<TraceStep>,
    pub states_explored: u64,
}

impl CheckReport {
    fn pass(prop: &PropertyIR, states: u64) -> Self {
        CheckReport {
            property_name: prop.name.clone(),
            class: prop.class,
            verdict: Verdict::Pass,
            trace: Vec::new(),
            states_explored: states,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report is serializable")
    }
}

fn trace_step(cycle: u64, signal: impl Into<String>, value: impl ToString) -> TraceStep {
    TraceStep { cycle, signal: signal.into(), value: value.to_string() }
}

fn bits_to_string(b: &Bits) -> String {
    format!("{:?}", b)
}

fn bits_from_string(s: &str) -> Option<Bits> {
    let (width, rest) = s.split_once("'b")?;
    let width: usize = width.parse().ok()?;
    let mut bits = vec![false; width];
    for (i, c) in rest.chars().rev().enumerate() {
        bits[i] = c == '1';
    }
    Some(Bits::from_bools(bits))
}

/// Checks a single generated property against a structure within a budget.
pub fn check_property(
    structure: &SafetyStructure,
    prop: &PropertyIR,
    budget: &CheckBudget,
) -> Result<CheckReport, RefModelError> {
    match prop.class {
        PropertyClass::Parameters => check_parameters(structure, prop),
        PropertyClass::Connectivity => check_connectivity(structure, prop),
        PropertyClass::SafetyMode => check_safety_mode(structure, prop, budget),
        PropertyClass::NormalMode => check_normal_mode(structure, prop, budget),
        PropertyClass::SelfTest => check_self_test(structure, prop),
    }
}

fn target_wrapper<'a>(
    structure: &'a SafetyStructure,
    prop: &PropertyIR,
) -> Result<&'a WrapperState, RefModelError> {
    let name = prop
        .target_wrapper()
        .ok_or_else(|| RefModelError::UnknownSignal(format!("{}: no wrapper reference", prop.name)))?;
    structure.wrapper(&name).ok_or(RefModelError::UnknownSignal(name))
}

fn check_parameters(structure: &SafetyStructure, prop: &PropertyIR) -> Result<CheckReport, RefModelError> {
    let mut report = CheckReport::pass(prop, 0);
    for term in &prop.terms {
        report.states_explored += 1;
        let Expr::Signal { path, .. } = &term.lhs else {
            return Err(RefModelError::UnknownSignal(term.lhs_path_or_default()));
        };
        let (instance, port) = path
            .split_once('.')
            .ok_or_else(|| RefModelError::UnknownSignal(path.clone()))?;
        let wrapper = structure
            .wrapper(instance)
            .ok_or_else(|| RefModelError::UnknownSignal(path.clone()))?;
        let (actual, expected) = match (port, &term.rhs) {
            ("dw", Expr::Int(v)) => (wrapper.geometry.data_width as u64, *v),
            ("method", Expr::MacroRef(m)) => {
                let expected = ProtectionMethod::from_name(
                    m.trim_start_matches("METHOD_").to_ascii_lowercase().as_str(),
                )
                .ok_or_else(|| RefModelError::UnknownSignal(m.clone()))?;
                (wrapper.spec.method.id() as u64, expected.id() as u64)
            }
            _ => return Err(RefModelError::UnknownSignal(path.clone())),
        };
        if actual != expected {
            report.verdict = Verdict::Fail;
            report.trace.push(trace_step(0, path.clone(), actual));
            report.trace.push(trace_step(0, format!("{} (expected)", path), expected));
        }
    }
    Ok(report)
}

impl Term {
    fn lhs_path_or_default(&self) -> String {
        match &self.lhs {
            Expr::Signal { path, .. } => path.clone(),
            other => format!("{:?}", other),
        }
    }
}

fn check_connectivity(structure: &SafetyStructure, prop: &PropertyIR) -> Result<CheckReport, RefModelError> {
    let mut report = CheckReport::pass(prop, 0);
    let top_prefix = format!("{}.", structure.block_name);
    for term in &prop.terms {
        report.states_explored += 1;
        match (&term.lhs, &term.rhs) {
            // Data slice terms, input (top.r_i == w.d_i) or output order.
            (
                Expr::Signal { path: a, msb: Some(am), lsb: Some(al) },
                Expr::Signal { path: b, msb: Some(bm), lsb: Some(bl) },
            ) => {
                let (reg_ref, wrap_ref) = if a.starts_with(&top_prefix) { (a, b) } else { (b, a) };
                let (reg_slice, wrap_slice) =
                    if a.starts_with(&top_prefix) { ((am, al), (bm, bl)) } else { ((bm, bl), (am, al)) };
                let reg = reg_ref
                    .strip_prefix(&top_prefix)
                    .and_then(|p| p.strip_suffix("_i").or_else(|| p.strip_suffix("_o")))
                    .ok_or_else(|| RefModelError::UnknownSignal(reg_ref.clone()))?;
                let wrapper = wrap_ref
                    .split_once('.')
                    .map(|(i, _)| i)
                    .ok_or_else(|| RefModelError::UnknownSignal(wrap_ref.clone()))?;
                if structure.wrapper(wrapper).is_none() {
                    return Err(RefModelError::UnknownSignal(wrap_ref.clone()));
                }
                if !structure.register_widths.contains_key(reg) {
                    return Err(RefModelError::UnknownSignal(reg_ref.clone()));
                }
                let found = structure.wiring.iter().any(|e| {
                    e.source_register == reg
                        && e.wrapper == wrapper
                        && (e.source_msb, e.source_lsb) == (*reg_slice.0, *reg_slice.1)
                        && (e.dest_msb, e.dest_lsb) == (*wrap_slice.0, *wrap_slice.1)
                });
                if !found {
                    report.verdict = Verdict::Fail;
                    report.trace.push(trace_step(
                        0,
                        format!("{}[{}:{}]", reg_ref, reg_slice.0, reg_slice.1),
                        format!("not wired to {}[{}:{}]", wrap_ref, wrap_slice.0, wrap_slice.1),
                    ));
                }
            }
            // Clock/reset terms: top.<net> == w.clk_i / w.rst_i.
            (Expr::Signal { path: a, msb: None, .. }, Expr::Signal { path: b, msb: None, .. }) => {
                let (net_ref, port_ref) = if a.starts_with(&top_prefix) { (a, b) } else { (b, a) };
                let net = net_ref
                    .strip_prefix(&top_prefix)
                    .ok_or_else(|| RefModelError::UnknownSignal(net_ref.clone()))?;
                let (instance, port) = port_ref
                    .split_once('.')
                    .ok_or_else(|| RefModelError::UnknownSignal(port_ref.clone()))?;
                let wrapper = structure
                    .wrapper(instance)
                    .ok_or_else(|| RefModelError::UnknownSignal(port_ref.clone()))?;
                let actual = match port {
                    "clk_i" => &wrapper.clock_net,
                    "rst_i" => &wrapper.reset_net,
                    _ => return Err(RefModelError::UnknownSignal(port_ref.clone())),
                };
                if actual != net {
                    report.verdict = Verdict::Fail;
                    report.trace.push(trace_step(0, port_ref.clone(), actual.clone()));
                    report
                        .trace
                        .push(trace_step(0, format!("{} (expected)", port_ref), net.to_string()));
                }
            }
            _ => return Err(RefModelError::UnknownSignal(term.lhs_path_or_default())),
        }
    }
    Ok(report)
}

/// Enumerates fault masks of weight 1..=budget over `width` bits.
fn masks_of_weight_up_to(width: u32, budget: u32) -> Vec<Bits> {
    let mut out = Vec::new();
    // width <= exhaustive_bit_limit here, so a u64 sweep is fine.
    for m in 1u64..(1u64 << width) {
        let pop = m.count_ones();
        if pop >= 1 && pop <= budget {
            out.push(Bits::from_u64(m, width as usize));
        }
    }
    out
}

fn random_bits(rng: &mut ChaCha8Rng, width: usize) -> Bits {
    Bits::from_bools((0..width).map(|_| rng.gen_bool(0.5)).collect())
}

fn random_mask(rng: &mut ChaCha8Rng, width: u32, budget: u32) -> Bits {
    let weight = rng.gen_range(1..=budget.min(width));
    let mut mask = Bits::zeros(width as usize);
    while (mask.popcount() as u32) < weight {
        mask.set(rng.gen_range(0..width as usize), true);
    }
    mask
}

/// One fault-injection case: err_o must assert, and a correction claim must
/// actually restore the written data.
fn safety_case_ok(wrapper: &WrapperState, data: &Bits, mask: &Bits) -> Result<bool, RefModelError> {
    let (out, status) = wrapper.write_and_observe(data, mask)?;
    if !status.is_error() {
        return Ok(false);
    }
    if status == DecodeStatus::CorrectedSingle || wrapper.spec.method == ProtectionMethod::Tmr {
        // TMR always presents voted data as corrected output.
        if status == DecodeStatus::CorrectedSingle && &out != data {
            return Ok(false);
        }
        if wrapper.spec.method == ProtectionMethod::Tmr && &out != data {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_safety_mode(
    structure: &SafetyStructure,
    prop: &PropertyIR,
    budget: &CheckBudget,
) -> Result<CheckReport, RefModelError> {
    let wrapper = target_wrapper(structure, prop)?;
    let total = wrapper.geometry.total_width();
    let dw = wrapper.geometry.data_width;
    let fault_budget = prop.fault_budget.unwrap_or(wrapper.geometry.max_errors).min(total);
    if fault_budget == 0 {
        let mut r = CheckReport::pass(prop, 0);
        r.verdict = Verdict::Vacuous;
        return Ok(r);
    }
    let mut report = CheckReport::pass(prop, 0);

    let fail = |report: &mut CheckReport, data: &Bits, mask: &Bits, wrapper: &WrapperState| {
        report.verdict = Verdict::Fail;
        report.trace = vec![
            trace_step(0, format!("{}.d_i", wrapper.spec.instance), bits_to_string(data)),
            trace_step(0, format!("{}.fault_mask", wrapper.spec.instance), bits_to_string(mask)),
            trace_step(1, format!("{}.err_o", wrapper.spec.instance), "violated"),
        ];
    };

    if total <= budget.exhaustive_bit_limit {
        let masks = masks_of_weight_up_to(total, fault_budget);
        for state in 0u64..(1u64 << dw) {
            let data = Bits::from_u64(state, dw as usize);
            for mask in &masks {
                report.states_explored += 1;
                if !safety_case_ok(wrapper, &data, mask)?
                    && report.verdict == Verdict::Pass {
                        fail(&mut report, &data, mask, wrapper);
                    }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        for _ in 0..budget.random_samples {
            let data = random_bits(&mut rng, dw as usize);
            let mask = random_mask(&mut rng, total, fault_budget);
            report.states_explored += 1;
            if !safety_case_ok(wrapper, &data, &mask)?
                && report.verdict == Verdict::Pass {
                    fail(&mut report, &data, &mask, wrapper);
                }
        }
    }
    if report.states_explored == 0 {
        report.verdict = Verdict::Vacuous;
    }
    Ok(report)
}

fn check_normal_mode(
    structure: &SafetyStructure,
    prop: &PropertyIR,
    budget: &CheckBudget,
) -> Result<CheckReport, RefModelError> {
    let wrapper = target_wrapper(structure, prop)?;
    let dw = wrapper.geometry.data_width;
    let mut report = CheckReport::pass(prop, 0);
    let zero_mask = Bits::zeros(wrapper.geometry.total_width() as usize);

    let run_case = |report: &mut CheckReport, data: Bits| -> Result<(), RefModelError> {
        report.states_explored += 1;
        let (out, status) = wrapper.write_and_observe(&data, &zero_mask)?;
        if (out != data || status.is_error())
            && report.verdict == Verdict::Pass {
                report.verdict = Verdict::Fail;
                report.trace = vec![
                    trace_step(0, format!("{}.we_i", wrapper.spec.instance), 1),
                    trace_step(0, format!("{}.d_i", wrapper.spec.instance), bits_to_string(&data)),
                    trace_step(1, format!("{}.d_o", wrapper.spec.instance), bits_to_string(&out)),
                ];
            }
        Ok(())
    };

    if dw <= budget.exhaustive_data_limit {
        for v in 0u64..(1u64 << dw) {
            run_case(&mut report, Bits::from_u64(v, dw as usize))?;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        for _ in 0..budget.random_samples {
            let data = random_bits(&mut rng, dw as usize);
            run_case(&mut report, data)?;
        }
    }
    Ok(report)
}

fn check_self_test(structure: &SafetyStructure, prop: &PropertyIR) -> Result<CheckReport, RefModelError> {
    let wrapper = target_wrapper(structure, prop)?;
    let instance = wrapper.spec.instance.clone();
    let mut report = CheckReport::pass(prop, 0);
    if !wrapper.spec.self_test {
        report.verdict = Verdict::Vacuous;
        return Ok(report);
    }
    let window = prop
        .terms
        .iter()
        .find_map(|t| match t.kind {
            TermKind::Within(n) => Some(n),
            _ => None,
        })
        .unwrap_or(crate::propgen::SELF_TEST_WINDOW);

    // Bounded simulation on a private copy: write a pattern, trigger the
    // test, expect an err pulse and test_done within the window, and the
    // stored data unchanged afterwards.
    let mut sim = structure.clone();
    let dw = wrapper.geometry.data_width as usize;
    let pattern = Bits::from_u64(0xA5A5_A5A5_A5A5_A5A5, dw);

    let mut inputs = StepInputs::default();
    // Drive the pattern through every register feeding this wrapper.
    for (reg, &w) in &sim.register_widths {
        let mut v = Bits::zeros(w as usize);
        for e in sim.wiring.clone().iter().filter(|e| &e.source_register == reg && e.wrapper == instance) {
            v.splice(e.source_lsb as usize, &pattern.slice(e.dest_msb as usize, e.dest_lsb as usize));
        }
        inputs.reg_inputs.insert(reg.clone(), v);
    }
    inputs.write_enable = true;
    step(&mut sim, &inputs)?;
    report.states_explored += 1;

    let trigger = StepInputs { test_trigger: true, ..StepInputs::default() };
    step(&mut sim, &trigger)?;

    let mut err_seen = false;
    let mut done_seen = false;
    for cycle in 1..=window as u64 {
        let out = step(&mut sim, &StepInputs::default())?;
        report.states_explored += 1;
        err_seen |= sim.wrapper(&instance).map(|w| w.err_out).unwrap_or(false)
            || out.wrapper_err.get(&instance).copied().unwrap_or(false);
        done_seen |= out.test_done.get(&instance).copied().unwrap_or(false);
        let _ = cycle;
    }
    let restored = {
        let w = sim.wrapper(&instance).expect("wrapper exists");
        let (data, status) = w.decode(&w.stored)?;
        !status.is_error() && data == pattern
    };
    if !(err_seen && done_seen && restored) {
        report.verdict = Verdict::Fail;
        report.trace = vec![
            trace_step(0, format!("{}.test_i", instance), 1),
            trace_step(window as u64, format!("{}.err_o pulse seen", instance), err_seen),
            trace_step(window as u64, format!("{}.test_done_o seen", instance), done_seen),
            trace_step(window as u64, format!("{}.state restored", instance), restored),
        ];
    }
    Ok(report)
}

/// Checks every property against the structure, reports in property order.
pub fn check_all(
    structure: &SafetyStructure,
    props: &[PropertyIR],
    budget: &CheckBudget,
) -> Result<Vec<CheckReport>, RefModelError> {
    props.iter().map(|p| check_property(structure, p, budget)).collect()
}

/// Re-runs a failed check's stimulus and confirms the violation reproduces.
/// Static-class failures replay by re-running the static check.
pub fn replay_trace(
    structure: &SafetyStructure,
    prop: &PropertyIR,
    report: &CheckReport,
) -> Result<bool, RefModelError> {
    if report.verdict != Verdict::Fail {
        return Ok(false);
    }
    match prop.class {
        PropertyClass::SafetyMode => {
            let wrapper = target_wrapper(structure, prop)?;
            let data = report
                .trace
                .iter()
                .find(|t| t.signal.ends_with(".d_i"))
                .and_then(|t| bits_from_string(&t.value))
                .ok_or_else(|| RefModelError::UnknownSignal("trace d_i".into()))?;
            let mask = report
                .trace
                .iter()
                .find(|t| t.signal.ends_with(".fault_mask"))
                .and_then(|t| bits_from_string(&t.value))
                .ok_or_else(|| RefModelError::UnknownSignal("trace fault_mask".into()))?;
            Ok(!safety_case_ok(wrapper, &data, &mask)?)
        }
        PropertyClass::NormalMode => {
            let wrapper = target_wrapper(structure, prop)?;
            let data = report
                .trace
                .iter()
                .find(|t| t.signal.ends_with(".d_i"))
                .and_then(|t| bits_from_string(&t.value))
                .ok_or_else(|| RefModelError::UnknownSignal("trace d_i".into()))?;
            let zero = Bits::zeros(wrapper.geometry.total_width() as usize);
            let (out, status) = wrapper.write_and_observe(&data, &zero)?;
            Ok(out != data || status.is_error())
        }
        _ => {
            let again = check_property(structure, prop, &CheckBudget::default())?;
            Ok(again.verdict == Verdict::Fail && again.trace == report.trace)
        }
    }
}

/// The five seeded defect kinds, mirroring production integration bugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MutationKind {
    DroppedSlice,
    SwappedSlices,
    WrongWidth,
    ClockMiswire,
    ResetMiswire,
}

impl MutationKind {
    pub const ALL: [MutationKind; 5] = [
        MutationKind::DroppedSlice,
        MutationKind::SwappedSlices,
        MutationKind::WrongWidth,
        MutationKind::ClockMiswire,
        MutationKind::ResetMiswire,
    ];

    /// The property class expected to catch this defect.
    pub fn detecting_class(self) -> PropertyClass {
        match self {
            MutationKind::WrongWidth => PropertyClass::Parameters,
            _ => PropertyClass::Connectivity,
        }
    }
}

/// Injects exactly one seeded defect of the given kind.
pub fn inject_mutation(
    structure: &SafetyStructure,
    kind: MutationKind,
    seed: u64,
) -> Result<SafetyStructure, RefModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mutated = structure.clone();
    let inapplicable = |reason: &str| RefModelError::MutationInapplicable {
        kind,
        reason: reason.to_string(),
    };
    match kind {
        MutationKind::DroppedSlice => {
            if mutated.wiring.is_empty() {
                return Err(inapplicable("no wiring entries"));
            }
            let idx = rng.gen_range(0..mutated.wiring.len());
            mutated.wiring.remove(idx);
        }
        MutationKind::SwappedSlices => {
            // Swap two entries within one wrapper and re-pack contiguous
            // destination offsets in the new order.
            let candidates: Vec<String> = mutated
                .wrappers
                .iter()
                .map(|w| w.spec.instance.clone())
                .filter(|i| mutated.wiring.iter().filter(|e| &e.wrapper == i).count() >= 2)
                .collect();
            if candidates.is_empty() {
                return Err(inapplicable("no wrapper holds two slices"));
            }
            let instance = &candidates[rng.gen_range(0..candidates.len())];
            let indices: Vec<usize> = mutated
                .wiring
                .iter()
                .enumerate()
                .filter(|(_, e)| &e.wrapper == instance)
                .map(|(i, _)| i)
                .collect();
            let a = rng.gen_range(0..indices.len());
            let mut b = rng.gen_range(0..indices.len());
            while b == a {
                b = rng.gen_range(0..indices.len());
            }
            mutated.wiring.swap(indices[a], indices[b]);
            let mut offset = 0u32;
            for &i in &indices {
                let w = mutated.wiring[i].width();
                mutated.wiring[i].dest_lsb = offset;
                mutated.wiring[i].dest_msb = offset + w - 1;
                offset += w;
            }
        }
        MutationKind::WrongWidth => {
            if mutated.wrappers.is_empty() {
                return Err(inapplicable("no wrappers"));
            }
            let idx = rng.gen_range(0..mutated.wrappers.len());
            let mut spec = mutated.wrappers[idx].spec.clone();
            spec.data_width += 1;
            mutated.wrappers[idx] = WrapperState::new(&spec)?;
        }
        MutationKind::ClockMiswire | MutationKind::ResetMiswire => {
            if mutated.wrappers.is_empty() {
                return Err(inapplicable("no wrappers"));
            }
            let idx = rng.gen_range(0..mutated.wrappers.len());
            let current = if kind == MutationKind::ClockMiswire {
                mutated.wrappers[idx].clock_net.clone()
            } else {
                mutated.wrappers[idx].reset_net.clone()
            };
            // Prefer another existing domain; otherwise invent a wrong net.
            let nets: Vec<String> = mutated
                .wrappers
                .iter()
                .map(|w| {
                    if kind == MutationKind::ClockMiswire {
                        w.clock_net.clone()
                    } else {
                        w.reset_net.clone()
                    }
                })
                .filter(|n| n != &current)
                .collect();
            let wrong = if nets.is_empty() {
                format!("{}_miswired", current)
            } else {
                nets[rng.gen_range(0..nets.len())].clone()
            };
            if kind == MutationKind::ClockMiswire {
                mutated.wrappers[idx].clock_net = wrong;
            } else {
                mutated.wrappers[idx].reset_net = wrong;
            }
        }
    }
    Ok(mutated)
}
