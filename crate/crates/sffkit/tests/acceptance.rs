//! Acceptance gate: the eight release criteria, one test per criterion.
//! Each test prints a single `criterion N ...: PASS` line on success; a
//! failing assertion is the FAIL line.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sffkit::bits::Bits;
use sffkit::ecc::{self, DecodeStatus};
use sffkit::optimizer::{
    self, pack, pack_bfd, pack_ilp, plan_area, Chunk, CompatKey, CostTable, MergePlan,
};
use sffkit::propgen;
use sffkit::refmodel::{self, CheckBudget, MutationKind, Verdict};
use sffkit::spec_model::{
    parse_spec, GeneratorOptions, ModelOfThings, OptimizeAlgorithm, ProtectedRange,
    ProtectionMethod, RegisterSpec,
};

const REF_XML: &str = r#"
<block name="top" clock="clk" reset="rst_n">
  <register name="a" width="32" reset_value="0">
    <protect range="1:0" method="secded" selftest="false"/>
  </register>
  <register name="b" width="32" reset_value="0">
    <protect range="1:0" method="secded" selftest="false"/>
  </register>
  <register name="c" width="32" reset_value="0">
    <protect range="29:0" method="secded" selftest="false"/>
  </register>
  <options optimize="ilp" max_width="32" cost_table="builtin-paper"/>
</block>
"#;

fn ref_plan(alg: OptimizeAlgorithm) -> (ModelOfThings, MergePlan) {
    let mot = parse_spec(REF_XML).expect("reference spec parses");
    let plan = pack(&mot, alg, &CostTable::builtin_paper(32)).expect("packing succeeds");
    (mot, plan)
}

fn slices(plan: &MergePlan) -> Vec<(&str, u32, u32, &str, u32, u32)> {
    plan.mapping
        .iter()
        .map(|e| {
            (
                e.source_register.as_str(),
                e.source_msb,
                e.source_lsb,
                e.wrapper.as_str(),
                e.dest_msb,
                e.dest_lsb,
            )
        })
        .collect()
}

#[test]
fn criterion_1_bfd_reference_layout() {
    let (_, plan) = ref_plan(OptimizeAlgorithm::Bfd);
    let widths: Vec<u32> = plan.wrappers.iter().map(|w| w.data_width).collect();
    assert_eq!(widths, vec![32, 2]);
    assert_eq!(
        slices(&plan),
        vec![
            ("c", 29, 0, "sff_wrapper_1", 29, 0),
            ("a", 1, 0, "sff_wrapper_1", 31, 30),
            ("b", 1, 0, "sff_wrapper_2", 1, 0),
        ]
    );
    println!("criterion 1 (BFD reference layout): PASS");
}

/// Exhaustive minimum cost over all width multisets covering `total` bits.
fn brute_force_min_cost(total: u32, max_width: u32, costs: &CostTable) -> f64 {
    fn rec(remaining: u32, max_part: u32, costs: &CostTable, acc: f64, best: &mut f64) {
        if remaining == 0 {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for w in (1..=max_part.min(remaining)).rev() {
            let cost = acc + costs.get(w).unwrap();
            if cost < *best {
                rec(remaining - w, w, costs, cost, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(total, max_width, costs, 0.0, &mut best);
    best
}

#[test]
fn criterion_2_ilp_reference_layout_and_optimality() {
    let (_, plan) = ref_plan(OptimizeAlgorithm::Ilp);
    let widths: Vec<u32> = plan.wrappers.iter().map(|w| w.data_width).collect();
    assert_eq!(widths, vec![17, 17]);
    assert_eq!(
        slices(&plan),
        vec![
            ("c", 16, 0, "sff_wrapper_1", 16, 0),
            ("c", 29, 17, "sff_wrapper_2", 12, 0),
            ("a", 1, 0, "sff_wrapper_2", 14, 13),
            ("b", 1, 0, "sff_wrapper_2", 16, 15),
        ]
    );
    // Independent optimality confirmation over every multiset covering the
    // 34 protected bits with widths in 1..=32.
    let costs = CostTable::builtin_paper(32);
    let optimum = brute_force_min_cost(34, 32, &costs);
    let achieved = costs.get(17).unwrap() * 2.0;
    assert!((achieved - optimum).abs() < 1e-9, "17+17 = {} vs optimum {}", achieved, optimum);
    assert!((plan_area(&plan, &costs).unwrap() - optimum).abs() < 1e-9);
    println!("criterion 2 (ILP reference layout, enumeration-confirmed optimum): PASS");
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn assert_contains_normalized(haystack: &str, golden: &str) {
    let h = normalize_ws(haystack);
    let g = normalize_ws(golden);
    assert!(h.contains(&g), "golden fragment missing:\n{}\nin:\n{}", golden, haystack);
}

#[test]
fn criterion_3_listing_golden_diff() {
    let golden: &[(OptimizeAlgorithm, &[&str])] = &[
        (
            OptimizeAlgorithm::None,
            &[
                "sff_wrapper_1.dw == 2 &&
                 sff_wrapper_2.dw == 2 &&
                 sff_wrapper_3.dw == 30;",
                "top.a_i[1:0] == sff_wrapper_1.d_i[1:0] &&
                 top.b_i[1:0] == sff_wrapper_2.d_i[1:0] &&
                 top.c_i[29:0] == sff_wrapper_3.d_i[29:0];",
                "sff_wrapper_1.d_o[1:0] == top.a_o[1:0] &&
                 sff_wrapper_2.d_o[1:0] == top.b_o[1:0] &&
                 sff_wrapper_3.d_o[29:0] == top.c_o[29:0];",
            ],
        ),
        (
            OptimizeAlgorithm::Bfd,
            &[
                "sff_wrapper_1.dw == 32 &&
                 sff_wrapper_2.dw == 2;",
                "top.c_i[29:0] == sff_wrapper_1.d_i[29:0] &&
                 top.a_i[1:0] == sff_wrapper_1.d_i[31:30] &&
                 top.b_i[1:0] == sff_wrapper_2.d_i[1:0];",
                "sff_wrapper_1.d_o[29:0] == top.c_o[29:0] &&
                 sff_wrapper_1.d_o[31:30] == top.a_o[1:0] &&
                 sff_wrapper_2.d_o[1:0] == top.b_o[1:0];",
            ],
        ),
        (
            OptimizeAlgorithm::Ilp,
            &[
                "sff_wrapper_1.dw == 17 &&
                 sff_wrapper_2.dw == 17;",
                "top.c_i[16:0] == sff_wrapper_1.d_i[16:0] &&
                 top.c_i[29:17] == sff_wrapper_2.d_i[12:0] &&
                 top.a_i[1:0] == sff_wrapper_2.d_i[14:13] &&
                 top.b_i[1:0] == sff_wrapper_2.d_i[16:15];",
                "sff_wrapper_1.d_o[16:0] == top.c_o[16:0] &&
                 sff_wrapper_2.d_o[12:0] == top.c_o[29:17] &&
                 sff_wrapper_2.d_o[14:13] == top.a_o[1:0] &&
                 sff_wrapper_2.d_o[16:15] == top.b_o[1:0];",
            ],
        ),
    ];
    for (alg, fragments) in golden {
        let (mot, plan) = ref_plan(*alg);
        let files = propgen::emit_sva(&propgen::generate_all(&mot, &plan), &mot, &plan);
        let all: String = files.values().cloned().collect();
        for fragment in *fragments {
            assert_contains_normalized(&all, fragment);
        }
    }
    println!("criterion 3 (property listings golden diff, 3 designs): PASS");
}

#[test]
fn criterion_4_redundancy_step_function() {
    let mut seen = BTreeSet::new();
    let mut prev = 0;
    for d in 4..=512 {
        let nr = ecc::redundant_bits(ProtectionMethod::Secded, d).unwrap();
        assert!(nr >= prev, "redundant_bits not monotone at d={}", d);
        prev = nr;
        seen.insert(nr);
    }
    assert_eq!(seen, (4..=11).collect::<BTreeSet<u32>>());
    assert_eq!(ecc::redundant_bits(ProtectionMethod::Secded, 4).unwrap(), 4);
    assert_eq!(ecc::redundant_bits(ProtectionMethod::Secded, 512).unwrap(), 11);
    assert!((ecc::code_rate(ProtectionMethod::Secded, 4).unwrap() - 0.5).abs() < 1e-12);
    assert!((ecc::code_rate(ProtectionMethod::Secded, 512).unwrap() - 512.0 / 523.0).abs() < 1e-12);
    println!("criterion 4 (redundancy step function and code-rate endpoints): PASS");
}

#[test]
fn criterion_5_error_state_count_equivalence() {
    // Closed form vs direct (state, mask) enumeration.
    for nd in 1u32..=12 {
        for nr in 0..=(13 - nd) {
            let total = nd + nr;
            for ne in 1u32..=2.min(total) {
                let mut masks = 0u64;
                for m in 1u64..(1 << total) {
                    if m.count_ones() <= ne {
                        masks += 1;
                    }
                }
                let expected = BigUint::from(masks) << nd;
                assert_eq!(
                    ecc::error_state_count(nd, nr, ne).unwrap(),
                    expected,
                    "nd={} nr={} ne={}",
                    nd,
                    nr,
                    ne
                );
            }
        }
    }
    // The exhaustive fault-injection sweep explores exactly that many cases.
    for d in 4u32..=8 {
        let xml = format!(
            r#"<block name="top" clock="clk" reset="rst_n">
                 <register name="x" width="{d}" reset_value="0">
                   <protect range="{}:0" method="secded"/>
                 </register>
               </block>"#,
            d - 1
        );
        let mot = parse_spec(&xml).unwrap();
        let plan = pack(&mot, OptimizeAlgorithm::None, &CostTable::builtin_linear(32)).unwrap();
        let structure = refmodel::elaborate(&mot, &plan).unwrap();
        let props = propgen::gen_safety_props(&mot, &plan);
        let report = refmodel::check_property(&structure, &props[0], &CheckBudget::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        let nr = ecc::redundant_bits(ProtectionMethod::Secded, d).unwrap();
        assert_eq!(BigUint::from(report.states_explored), ecc::error_state_count(d, nr, 2).unwrap());
    }
    println!("criterion 5 (error-state formula vs enumeration, explored-case law): PASS");
}

#[test]
fn criterion_6_ecc_soundness_exhaustive() {
    for d in 1u32..=8 {
        let total = d + ecc::redundant_bits(ProtectionMethod::Secded, d).unwrap();
        for v in 0u64..(1 << d) {
            let data = Bits::from_u64(v, d as usize);
            let code = ecc::secded_encode(&data).unwrap();
            for i in 0..total as usize {
                let mut c = code.clone();
                c.flip(i);
                let (out, status) = ecc::secded_decode(&c).unwrap();
                assert_eq!(status, DecodeStatus::CorrectedSingle, "d={} v={} i={}", d, v, i);
                assert_eq!(out, data, "single flip not corrected: d={} v={} i={}", d, v, i);
                for j in (i + 1)..total as usize {
                    let mut c2 = c.clone();
                    c2.flip(j);
                    let (_, status) = ecc::secded_decode(&c2).unwrap();
                    assert_eq!(status, DecodeStatus::DetectedDouble, "d={} v={} i={} j={}", d, v, i, j);
                }
            }
        }
        // Parity flags every odd-weight fault.
        for v in 0u64..(1 << d) {
            let code = ecc::parity_encode(&Bits::from_u64(v, d as usize)).unwrap();
            for m in 1u64..(1 << (d + 1)) {
                if m.count_ones() % 2 == 1 {
                    let faulted = code.xor(&Bits::from_u64(m, d as usize + 1));
                    let (_, status) = ecc::parity_check(&faulted).unwrap();
                    assert!(status.is_error(), "parity missed d={} v={} m={:b}", d, v, m);
                }
            }
        }
    }
    // TMR vote survives arbitrary corruption of any single copy.
    for d in 1u32..=6 {
        for v in 0u64..(1 << d) {
            let data = Bits::from_u64(v, d as usize);
            for bad in 0u64..(1 << d) {
                if bad == v {
                    continue;
                }
                let corrupt = Bits::from_u64(bad, d as usize);
                for pos in 0..3 {
                    let copies = [
                        if pos == 0 { &corrupt } else { &data },
                        if pos == 1 { &corrupt } else { &data },
                        if pos == 2 { &corrupt } else { &data },
                    ];
                    let (out, status) = ecc::tmr_vote(copies[0], copies[1], copies[2]).unwrap();
                    assert_eq!(out, data);
                    assert!(status.is_error());
                }
            }
        }
    }
    println!("criterion 6 (ECC soundness, exhaustive to d=8): PASS");
}

/// A random single-block model: ≤6 registers, widths ≤13, one protected
/// range per register, mixed methods and domains.
fn random_mot(seed: u64) -> ModelOfThings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_regs = rng.gen_range(1..=6);
    let methods = [
        ProtectionMethod::Parity,
        ProtectionMethod::Ded,
        ProtectionMethod::Secded,
        ProtectionMethod::Dmr,
        ProtectionMethod::Tmr,
    ];
    let clocks = ["clk", "clk_b"];
    let resets = ["rst_n", "rst_b_n"];
    let mut registers = Vec::new();
    let mut protections = Vec::new();
    for i in 0..n_regs {
        let width = rng.gen_range(2..=13u32);
        let name = format!("r{}", i);
        registers.push(RegisterSpec {
            name: name.clone(),
            width,
            reset_value: BigUint::from(0u32),
            declaration_index: i,
        });
        let lsb = rng.gen_range(0..width);
        let msb = rng.gen_range(lsb..width);
        protections.push(ProtectedRange {
            register: name,
            msb,
            lsb,
            method: methods[rng.gen_range(0..methods.len())],
            self_test: rng.gen_bool(0.3),
            clock_domain: clocks[rng.gen_range(0..clocks.len())].to_string(),
            reset_domain: resets[rng.gen_range(0..resets.len())].to_string(),
        });
    }
    let options = GeneratorOptions {
        algorithm: [OptimizeAlgorithm::None, OptimizeAlgorithm::Bfd, OptimizeAlgorithm::Ilp]
            [rng.gen_range(0..3)],
        max_merged_width: 13,
        ..GeneratorOptions::default()
    };
    ModelOfThings {
        block_name: "top".into(),
        clock: "clk".into(),
        reset: "rst_n".into(),
        registers,
        protections,
        options,
    }
}

#[test]
fn criterion_7_oracle_soundness_and_mutation_sensitivity() {
    let budget = CheckBudget::default();
    let mut applicable = vec![0u32; MutationKind::ALL.len()];
    for seed in 0..100u64 {
        let mot = random_mot(seed);
        let costs = CostTable::builtin_linear(mot.options.max_merged_width);
        let plan = pack(&mot, mot.options.algorithm, &costs).unwrap();
        let structure = refmodel::elaborate(&mot, &plan).unwrap();
        let props = propgen::generate_all(&mot, &plan);
        propgen::validate_props(&props, &plan).unwrap();

        for report in refmodel::check_all(&structure, &props, &budget).unwrap() {
            assert_ne!(
                report.verdict,
                Verdict::Fail,
                "seed {}: {} failed unmutated: {:?}",
                seed,
                report.property_name,
                report.trace
            );
        }

        for (k, kind) in MutationKind::ALL.iter().enumerate() {
            let mutated = match refmodel::inject_mutation(&structure, *kind, seed) {
                Ok(m) => m,
                Err(refmodel::RefModelError::MutationInapplicable { .. }) => continue,
                Err(e) => panic!("seed {}: {:?}: {}", seed, kind, e),
            };
            applicable[k] += 1;
            let class = kind.detecting_class();
            let relevant: Vec<_> = props.iter().filter(|p| p.class == class).cloned().collect();
            let reports = refmodel::check_all(&mutated, &relevant, &budget).unwrap();
            assert!(
                reports.iter().any(|r| r.verdict == Verdict::Fail),
                "seed {}: {:?} escaped all {:?} properties",
                seed,
                kind,
                class
            );
        }
    }
    assert!(applicable.iter().all(|&n| n > 0), "some mutation kind never applied: {:?}", applicable);
    println!("criterion 7 (oracle soundness + 5-kind mutation sensitivity, 100 seeds): PASS");
}

fn random_chunks(seed: u64) -> (Vec<Chunk>, u32, CostTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_width = rng.gen_range(4..=32u32);
    let costs = if rng.gen_bool(0.5) {
        CostTable::builtin_linear(max_width)
    } else {
        CostTable::builtin_paper(max_width)
    };
    let keys = [
        CompatKey {
            method: ProtectionMethod::Secded,
            clock_domain: "clk".into(),
            reset_domain: "rst_n".into(),
            self_test: false,
        },
        CompatKey {
            method: ProtectionMethod::Parity,
            clock_domain: "clk".into(),
            reset_domain: "rst_n".into(),
            self_test: false,
        },
    ];
    let n_keys = rng.gen_range(1..=2usize);
    let n_chunks = rng.gen_range(1..=7usize);
    let mut chunks = Vec::new();
    let mut total = 0u32;
    for i in 0..n_chunks {
        let size = rng.gen_range(1..=max_width);
        if total + size > 64 {
            break;
        }
        total += size;
        let lsb = rng.gen_range(0..4u32);
        chunks.push(Chunk {
            source_register: format!("r{}", i),
            msb: lsb + size - 1,
            lsb,
            declaration_index: i,
            key: keys[rng.gen_range(0..n_keys)].clone(),
        });
    }
    (chunks, max_width, costs)
}

fn covered_bits(plan: &MergePlan) -> BTreeSet<(String, u32)> {
    let mut bits = BTreeSet::new();
    for e in &plan.mapping {
        for b in e.source_lsb..=e.source_msb {
            assert!(bits.insert((e.source_register.clone(), b)), "bit mapped twice");
        }
    }
    bits
}

#[test]
fn criterion_8_optimizer_properties_randomized() {
    for seed in 0..200u64 {
        let (chunks, max_width, costs) = random_chunks(seed);
        let expected_bits: BTreeSet<(String, u32)> = chunks
            .iter()
            .flat_map(|c| {
                let name = c.source_register.clone();
                (c.lsb..=c.msb).map(move |b| (name.clone(), b))
            })
            .collect();

        let bfd = pack_bfd(&chunks, max_width).unwrap();
        let ilp = pack_ilp(&chunks, max_width, &costs).unwrap();

        // Bit conservation: every protected bit mapped exactly once.
        assert_eq!(covered_bits(&bfd), expected_bits, "seed {}: BFD bit loss", seed);
        assert_eq!(covered_bits(&ilp), expected_bits, "seed {}: ILP bit loss", seed);

        let bfd_area = plan_area(&bfd, &costs).unwrap();
        let ilp_area = plan_area(&ilp, &costs).unwrap();
        assert!(ilp_area <= bfd_area + 1e-9, "seed {}: ILP {} > BFD {}", seed, ilp_area, bfd_area);

        // Per compatibility group, ILP hits the enumerated optimum.
        let mut optimum = 0.0;
        let mut group_keys: Vec<&CompatKey> = chunks.iter().map(|c| &c.key).collect();
        group_keys.sort();
        group_keys.dedup();
        for key in group_keys {
            let t: u32 = chunks.iter().filter(|c| &c.key == key).map(|c| c.size_bits()).sum();
            optimum += brute_force_min_cost(t, max_width, &costs);
        }
        assert!(
            (ilp_area - optimum).abs() < 1e-9,
            "seed {}: ILP area {} != optimum {}",
            seed,
            ilp_area,
            optimum
        );

        for plan in [&bfd, &ilp] {
            assert!(
                optimizer::crosscheck_plans(plan, plan).is_empty(),
                "seed {}: self-crosscheck not empty",
                seed
            );
        }
    }
    println!("criterion 8 (optimizer invariants on 200 random chunk sets): PASS");
}
