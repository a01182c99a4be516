//! Acceptance checks for the whole stack. Each check prints exactly one
//! `[PASS]`/`[FAIL]` line (run with `-- --nocapture` to see the lines for
//! passing checks) and fails the test on any violation, with measured
//! values in the message.
//!
//! Checks 1, 2, and 4 share one pass over a 1000-matrix corpus; the
//! result is computed once and cached.

use std::sync::OnceLock;

use dcsr_core::baselines::{bcsr, csr, ri};
use dcsr_core::container::{
    self, audit_group_constraints, decode_matrix, encode_matrix, DcsrMatrix,
};
use dcsr_core::dbe;
use dcsr_core::dle::GROUP_SIZES;
use dcsr_core::engine::{ScalarEngine, VectorEngine};
use dcsr_core::error::Error;
use dcsr_core::kernels::{
    dcsr_spmm_ib, dcsr_spmm_vb, dcsr_spmv, dense_mac_lanes, dense_spmm, dense_spmv,
    quantize_outputs, ri_spmm, RequantSpec,
};
use dcsr_core::matrix::{
    generate_activations, generate_uniform_sparse, DenseMatrixI8, GeneratorSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SPARSITIES: [f64; 7] = [0.0, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98];

/// The six weight shapes of the large synthetic model used by the
/// footprint checks: five pointwise-convolution layers and one final
/// fully-connected layer.
const MODEL_L_LAYERS: [(usize, usize); 6] = [
    (276, 276),
    (276, 276),
    (276, 276),
    (276, 276),
    (276, 276),
    (12, 16560),
];

fn report(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {name}: {detail}");
    assert!(pass, "[FAIL] {name}: {detail}");
}

fn corpus_specs() -> Vec<GeneratorSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDC5A);
    (0..1000u64)
        .map(|i| GeneratorSpec {
            rows: rng.gen_range(1..=512),
            cols: rng.gen_range(1..=512),
            sparsity: CORPUS_SPARSITIES[(i % 7) as usize],
            seed: i,
        })
        .collect()
}

/// Zero-padding elements RI(b=4) must insert for this matrix, computed
/// from first principles (independently of the encoder).
fn ri_required_pads(m: &DenseMatrixI8) -> usize {
    let mut pads = 0usize;
    for r in 0..m.rows() {
        let mut cursor = 0usize;
        for (c, &v) in m.row(r).iter().enumerate() {
            if v != 0 {
                pads += (c - cursor).saturating_sub(1) / 15;
                cursor = c;
            }
        }
    }
    pads
}

/// 2x2 tiles containing at least one nonzero, computed independently of
/// the block encoder.
fn nonzero_blocks(m: &DenseMatrixI8) -> usize {
    let mut blocks = 0usize;
    for br in 0..m.rows().div_ceil(2) {
        for bc in 0..m.cols().div_ceil(2) {
            let mut any = false;
            for r in 2 * br..(2 * br + 2).min(m.rows()) {
                for c in 2 * bc..(2 * bc + 2).min(m.cols()) {
                    any |= m.get(r, c) != 0;
                }
            }
            blocks += any as usize;
        }
    }
    blocks
}

#[derive(Default)]
struct CorpusOutcome {
    matrices: usize,
    dcsr_ok: usize,
    csr_ok: usize,
    csr_at_limit: usize,
    bcsr_ok: usize,
    bcsr_at_limit: usize,
    ri_ok: usize,
    ri_at_limit: usize,
    round_trip_bad: Vec<String>,
    serial_bad: Vec<String>,
    audit_bad: Vec<String>,
    audit_groups: usize,
    audit_max_residual: u8,
    audit_max_offset: u32,
}

static CORPUS: OnceLock<CorpusOutcome> = OnceLock::new();

fn corpus_outcome() -> &'static CorpusOutcome {
    CORPUS.get_or_init(|| {
        let mut out = CorpusOutcome::default();
        for (i, spec) in corpus_specs().iter().enumerate() {
            let tag = format!(
                "#{i} {}x{} s={} seed={}",
                spec.rows, spec.cols, spec.sparsity, spec.seed
            );
            let m = generate_uniform_sparse(spec).unwrap();
            out.matrices += 1;

            let g = GROUP_SIZES[i % GROUP_SIZES.len()];
            match encode_matrix(&m, g) {
                Ok(d) => {
                    if decode_matrix(&d).unwrap() != m {
                        out.round_trip_bad.push(format!("dcsr {tag}"));
                    } else {
                        out.dcsr_ok += 1;
                    }
                    match container::deserialize(&container::serialize(&d)) {
                        Ok(back) if back == d => {}
                        _ => out.serial_bad.push(format!("dcsr {tag}")),
                    }
                    match audit_group_constraints(&d) {
                        Ok(a) => {
                            out.audit_groups += a.groups;
                            out.audit_max_residual = out.audit_max_residual.max(a.max_residual);
                            out.audit_max_offset = out.audit_max_offset.max(a.max_offset);
                        }
                        Err(e) => out.audit_bad.push(format!("{tag}: {e}")),
                    }
                }
                Err(e) => out
                    .round_trip_bad
                    .push(format!("dcsr {tag}: encode failed: {e}")),
            }

            match csr::encode_csr(&m) {
                Ok(c) => {
                    if csr::decode_csr(&c).unwrap() != m {
                        out.round_trip_bad.push(format!("csr {tag}"));
                    } else {
                        out.csr_ok += 1;
                    }
                    match csr::deserialize_csr(&csr::serialize_csr(&c)) {
                        Ok(back) if back == c => {}
                        _ => out.serial_bad.push(format!("csr {tag}")),
                    }
                }
                Err(Error::FormatLimit(_)) if m.nnz() > u16::MAX as usize => {
                    out.csr_at_limit += 1;
                }
                Err(e) => out.round_trip_bad.push(format!("csr {tag}: {e}")),
            }

            match bcsr::encode_bcsr(&m) {
                Ok(b) => {
                    if bcsr::decode_bcsr(&b).unwrap() != m {
                        out.round_trip_bad.push(format!("bcsr {tag}"));
                    } else {
                        out.bcsr_ok += 1;
                    }
                    match bcsr::deserialize_bcsr(&bcsr::serialize_bcsr(&b)) {
                        Ok(back) if back == b => {}
                        _ => out.serial_bad.push(format!("bcsr {tag}")),
                    }
                }
                Err(Error::FormatLimit(_)) if nonzero_blocks(&m) > u16::MAX as usize => {
                    out.bcsr_at_limit += 1;
                }
                Err(e) => out.round_trip_bad.push(format!("bcsr {tag}: {e}")),
            }

            match ri::encode_ri(&m, 4) {
                Ok(r) => {
                    if ri::decode_ri(&r).unwrap() != m {
                        out.round_trip_bad.push(format!("ri {tag}"));
                    } else {
                        out.ri_ok += 1;
                    }
                    match ri::deserialize_ri(&ri::serialize_ri(&r)) {
                        Ok(back) if back == r => {}
                        _ => out.serial_bad.push(format!("ri {tag}")),
                    }
                }
                Err(Error::FormatLimit(_))
                    if m.nnz() + ri_required_pads(&m) > u16::MAX as usize =>
                {
                    out.ri_at_limit += 1;
                }
                Err(e) => out.round_trip_bad.push(format!("ri {tag}: {e}")),
            }
        }
        out
    })
}

#[test]
fn check_1_round_trip_exactness() {
    let o = corpus_outcome();
    let pass = o.round_trip_bad.is_empty()
        && o.dcsr_ok == o.matrices
        && o.csr_ok + o.csr_at_limit == o.matrices
        && o.bcsr_ok + o.bcsr_at_limit == o.matrices
        && o.ri_ok + o.ri_at_limit == o.matrices
        && o.csr_ok >= 800
        && o.bcsr_ok >= 950
        && o.ri_ok >= 800;
    report(
        "1 round-trip exactness",
        pass,
        &format!(
            "{} matrices; dcsr {}/{}; csr {} ok + {} verified at 16-bit limit; bcsr {} + {}; ri {} + {}; failures: {:?}",
            o.matrices,
            o.dcsr_ok,
            o.matrices,
            o.csr_ok,
            o.csr_at_limit,
            o.bcsr_ok,
            o.bcsr_at_limit,
            o.ri_ok,
            o.ri_at_limit,
            o.round_trip_bad
        ),
    );
}

#[test]
fn check_2_serialization_identity() {
    let o = corpus_outcome();
    let golden: &[u8] = include_bytes!("golden/dcsr_1x16.bin");
    let golden_ok = match container::deserialize(golden) {
        Ok(d) => container::serialize(&d) == golden,
        Err(_) => false,
    };
    let pass = o.serial_bad.is_empty() && golden_ok;
    report(
        "2 serialization identity",
        pass,
        &format!(
            "parse(emit(x)) == x across the corpus for all four formats; golden 68-byte container {}; failures: {:?}",
            if golden_ok { "stable" } else { "MISMATCH" },
            o.serial_bad
        ),
    );
}

#[test]
fn check_3_kernel_oracle_equivalence() {
    let mut failures: Vec<String> = Vec::new();
    let mut cases = 0usize;

    let run_case = |m: &DenseMatrixI8,
                    pixels: usize,
                    g: usize,
                    zp: i16,
                    rq: &RequantSpec,
                    case_seed: u64,
                    failures: &mut Vec<String>| {
        let a = generate_activations(pixels, m.cols(), case_seed ^ 0xA5A5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed ^ 0x77);
        let bias: Vec<i32> = (0..m.rows()).map(|_| rng.gen_range(-1000..=1000)).collect();
        let x: Vec<i8> = a.row(0).to_vec();

        let want_v = dense_spmv(m, &x, zp, &bias).unwrap();
        let want_m = dense_spmm(m, &a, zp, &bias).unwrap();

        let d = encode_matrix(m, g).unwrap();
        let mut eng = ScalarEngine::new(g).unwrap();
        let w = ri::encode_ri(m, 4).unwrap();

        let got_v = dcsr_spmv(&d, &x, zp, &bias, &mut eng).unwrap();
        let got_vb = dcsr_spmm_vb(&d, &a, zp, &bias, &mut eng).unwrap();
        let got_ib = dcsr_spmm_ib(&d, &a, zp, &bias, &mut eng).unwrap();
        let got_ri = ri_spmm(&w, &a, zp, &bias, &mut eng).unwrap();

        for (kernel, got, want) in [
            ("dcsr_spmv", &got_v, &want_v),
            ("dcsr_spmm_vb", &got_vb, &want_m),
            ("dcsr_spmm_ib", &got_ib, &want_m),
            ("ri_spmm", &got_ri, &want_m),
        ] {
            if got != want {
                failures.push(format!("{kernel} raw mismatch (seed {case_seed})"));
            }
            if quantize_outputs(got, rq) != quantize_outputs(want, rq) {
                failures.push(format!("{kernel} requantized mismatch (seed {case_seed})"));
            }
        }
    };

    for i in 0..500u64 {
        let spec = GeneratorSpec {
            rows: 1 + (i as usize * 7) % 48,
            cols: 1 + (i as usize * 13) % 96,
            sparsity: CORPUS_SPARSITIES[(i % 7) as usize],
            seed: i,
        };
        let m = generate_uniform_sparse(&spec).unwrap();
        let g = GROUP_SIZES[i as usize % GROUP_SIZES.len()];
        let zp = (i % 33) as i16 - 16;
        let pixels = 1 + (i % 4) as usize;
        let rq = RequantSpec::new(
            1 + (i.wrapping_mul(0x9E37_79B9) % 0xF_FFFF) as i32,
            (i % 21) as u8,
            (i % 129) as i16 - 64,
        )
        .unwrap();
        run_case(&m, pixels, g, zp, &rq, i, &mut failures);
        cases += 1;
    }

    // model-shaped instances: the final fully-connected layer and one
    // pointwise convolution over a 7x7 feature map
    let fc = generate_uniform_sparse(&GeneratorSpec {
        rows: 12,
        cols: 16560,
        sparsity: 0.9,
        seed: 1,
    })
    .unwrap();
    run_case(
        &fc,
        1,
        16,
        4,
        &RequantSpec::new(3, 6, -5).unwrap(),
        9001,
        &mut failures,
    );
    cases += 1;
    let pwc = generate_uniform_sparse(&GeneratorSpec {
        rows: 276,
        cols: 276,
        sparsity: 0.9,
        seed: 2,
    })
    .unwrap();
    run_case(
        &pwc,
        49,
        16,
        -7,
        &RequantSpec::new(5, 8, 3).unwrap(),
        9002,
        &mut failures,
    );
    cases += 1;

    report(
        "3 kernel oracle equivalence",
        failures.is_empty(),
        &format!(
            "{cases} cases x 4 kernels, raw i32 and requantized i8, including 12x16560 and 276x276@49px; failures: {failures:?}"
        ),
    );
}

#[test]
fn check_4_group_constraint_audit() {
    let o = corpus_outcome();
    let pass = o.audit_bad.is_empty() && o.audit_max_residual <= 127 && o.audit_max_offset <= 255;
    report(
        "4 group constraint audit",
        pass,
        &format!(
            "{} groups audited: max residual {} (<=127), max lane offset {} (<=255), intercept steps i8 by storage type; violations: {:?}",
            o.audit_groups, o.audit_max_residual, o.audit_max_offset, o.audit_bad
        ),
    );
}

fn pad_fraction_ri(r: &ri::RiMatrix) -> f64 {
    r.padding_elements() as f64 / (r.total_elements() - r.padding_elements()) as f64
}

fn pad_fraction_dcsr(d: &DcsrMatrix) -> f64 {
    d.padding_elements() as f64 / (d.total_elements() - d.padding_elements()) as f64
}

#[test]
fn check_5_padding_fraction_bands() {
    let mut ri90 = (f64::MAX, f64::MIN);
    let mut ri80 = (f64::MAX, f64::MIN);
    let mut dcsr90 = (f64::MAX, f64::MIN);
    for seed in 0..10u64 {
        let m90 = generate_uniform_sparse(&GeneratorSpec {
            rows: 276,
            cols: 276,
            sparsity: 0.9,
            seed,
        })
        .unwrap();
        let f = pad_fraction_ri(&ri::encode_ri(&m90, 4).unwrap());
        ri90 = (ri90.0.min(f), ri90.1.max(f));
        let f = pad_fraction_dcsr(&encode_matrix(&m90, 16).unwrap());
        dcsr90 = (dcsr90.0.min(f), dcsr90.1.max(f));

        let m80 = generate_uniform_sparse(&GeneratorSpec {
            rows: 276,
            cols: 276,
            sparsity: 0.8,
            seed,
        })
        .unwrap();
        let f = pad_fraction_ri(&ri::encode_ri(&m80, 4).unwrap());
        ri80 = (ri80.0.min(f), ri80.1.max(f));
    }
    let pass =
        ri90.0 >= 0.18 && ri90.1 <= 0.30 && dcsr90.1 <= 0.08 && ri80.0 >= 0.02 && ri80.1 <= 0.06;
    report(
        "5 padding fraction bands",
        pass,
        &format!(
            "276x276, g=16, 10 seeds: ri@90% {:.4}..{:.4} (band 0.18..0.30), dcsr@90% {:.4}..{:.4} (<=0.08), ri@80% {:.4}..{:.4} (band 0.02..0.06)",
            ri90.0, ri90.1, dcsr90.0, dcsr90.1, ri80.0, ri80.1
        ),
    );
}

fn model_l(sparsity: f64, seed_base: u64) -> Vec<DenseMatrixI8> {
    MODEL_L_LAYERS
        .iter()
        .enumerate()
        .map(|(i, &(rows, cols))| {
            generate_uniform_sparse(&GeneratorSpec {
                rows,
                cols,
                sparsity,
                seed: seed_base * 100 + i as u64,
            })
            .unwrap()
        })
        .collect()
}

#[test]
fn check_6_metadata_to_values_ratio() {
    let mut ratios = Vec::new();
    for seed in 0..3u64 {
        let mut meta = 0u64;
        let mut values = 0u64;
        for layer in model_l(0.9, seed) {
            let fp = container::footprint(&encode_matrix(&layer, 16).unwrap());
            meta += fp.metadata_bytes;
            values += fp.values_bytes;
        }
        ratios.push(meta as f64 / values as f64);
    }
    let pass = ratios.iter().all(|r| (0.82..=1.11).contains(r));
    report(
        "6 metadata-to-values ratio",
        pass,
        &format!(
            "large-model layer set @90%, g=16, 3 seeds: aggregate metadata/values = {:?} (band 0.82..1.11)",
            ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn check_7_footprint_ordering() {
    let mut lines = Vec::new();
    let mut pass = true;
    for &sparsity in &[0.70, 0.75, 0.80, 0.85, 0.90, 0.95] {
        let mut dcsr_total = 0u64;
        let mut csr_total = 0u64;
        let mut bcsr_total = 0u64;
        let mut dense_total = 0u64;
        for seed in 0..3u64 {
            for layer in model_l(sparsity, seed) {
                dense_total += (layer.rows() * layer.cols()) as u64;
                dcsr_total += container::footprint(&encode_matrix(&layer, 16).unwrap()).total_bytes;
                csr_total += csr::footprint_csr(&csr::encode_csr(&layer).unwrap()).total_bytes;
                bcsr_total += bcsr::footprint_bcsr(&bcsr::encode_bcsr(&layer).unwrap()).total_bytes;
            }
        }
        let ok = dcsr_total < csr_total && csr_total < dense_total && dcsr_total < bcsr_total;
        pass &= ok;
        lines.push(format!(
            "{}%: dcsr {} {} csr {} < dense {}, bcsr {}",
            (sparsity * 100.0).round(),
            dcsr_total,
            if dcsr_total < csr_total { "<" } else { ">=" },
            csr_total,
            dense_total,
            bcsr_total
        ));
    }
    report(
        "7 footprint ordering",
        pass,
        &format!(
            "large-model layer set, 3 seeds, require dcsr < csr < dense and dcsr < bcsr: {}",
            lines.join("; ")
        ),
    );
}

#[test]
fn check_8_counter_laws() {
    let mut failures = Vec::new();
    for &(rows, cols, sparsity, g, pixels, seed) in &[
        (276usize, 276usize, 0.9f64, 16usize, 49usize, 3u64),
        (64, 64, 0.8, 8, 5, 4),
        (20, 48, 0.7, 4, 3, 5),
    ] {
        let m = generate_uniform_sparse(&GeneratorSpec {
            rows,
            cols,
            sparsity,
            seed,
        })
        .unwrap();
        let d = encode_matrix(&m, g).unwrap();
        let bias = vec![0i32; rows];
        let stored = d.total_elements() as u64;

        let counters_at = |px: usize, vb: bool| {
            let a = generate_activations(px, cols, seed).unwrap();
            let mut eng = ScalarEngine::new(g).unwrap();
            if vb {
                dcsr_spmm_vb(&d, &a, 1, &bias, &mut eng).unwrap();
            } else {
                dcsr_spmm_ib(&d, &a, 1, &bias, &mut eng).unwrap();
            }
            eng.counters()
        };

        let vb = counters_at(pixels, true);
        if vb.mac_lanes != dense_mac_lanes(rows, cols, pixels) {
            failures.push(format!(
                "{rows}x{cols}: vb mac {} != dense {}",
                vb.mac_lanes,
                dense_mac_lanes(rows, cols, pixels)
            ));
        }

        let ib = counters_at(pixels, false);
        let ib_bound = stored.div_ceil(g as u64) * g as u64 * pixels as u64;
        if ib.mac_lanes != stored * pixels as u64 {
            failures.push(format!(
                "{rows}x{cols}: ib mac {} != stored*pixels {}",
                ib.mac_lanes,
                stored * pixels as u64
            ));
        }
        if ib.mac_lanes > ib_bound {
            failures.push(format!(
                "{rows}x{cols}: ib mac {} > bound {ib_bound}",
                ib.mac_lanes
            ));
        }
        if ib.mac_lanes >= vb.mac_lanes {
            failures.push(format!(
                "{rows}x{cols}: ib mac {} not below dense {} at sparsity {sparsity}",
                ib.mac_lanes, vb.mac_lanes
            ));
        }
        if ib.gather_loads != d.total_groups() as u64 * pixels as u64 {
            failures.push(format!(
                "{rows}x{cols}: ib gathers {} != groups*pixels {}",
                ib.gather_loads,
                d.total_groups() as u64 * pixels as u64
            ));
        }

        // decode-once: total op count affine in pixels, with a nonzero
        // pixel-independent decode term; scatters don't scale with pixels
        for vb_mode in [true, false] {
            let c1 = counters_at(1, vb_mode);
            let c3 = counters_at(3, vb_mode);
            let c5 = counters_at(5, vb_mode);
            if c3.vector_ops - c1.vector_ops != c5.vector_ops - c3.vector_ops {
                failures.push(format!(
                    "{rows}x{cols}: vector_ops not affine (vb={vb_mode})"
                ));
            }
            let per_pixel = (c3.vector_ops - c1.vector_ops) / 2;
            if c1.vector_ops <= per_pixel {
                failures.push(format!("{rows}x{cols}: no decode term (vb={vb_mode})"));
            }
            if vb_mode
                && !(c1.scatter_stores == c3.scatter_stores
                    && c3.scatter_stores == c5.scatter_stores)
            {
                failures.push(format!("{rows}x{cols}: vb scatters scale with pixels"));
            }
        }
    }
    report(
        "8 counter laws",
        failures.is_empty(),
        &format!(
            "vb==dense mac, ib==stored-elements mac (within group bound), decode once per weight row; failures: {failures:?}"
        ),
    );
}

#[test]
fn check_9_nibble_codec_inverses() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD8E);
    let mut checked = 0usize;
    for i in 0..100_000usize {
        let g = GROUP_SIZES[i % GROUP_SIZES.len()];
        let len = rng.gen_range(1..=g);
        let mut deltas: Vec<u8> = (0..len).map(|_| rng.gen_range(0..=127)).collect();
        let grp = dbe::decompose_group(&deltas, g).unwrap();
        let back = dbe::recompose_group(&grp).unwrap();
        deltas.resize(g, 0);
        assert_eq!(back, deltas, "group codec not an inverse (case {i})");

        let first: Vec<u8> = (0..g).map(|_| rng.gen_range(0..=15)).collect();
        let second: Option<Vec<u8>> = if rng.gen_bool(0.5) {
            Some((0..g).map(|_| rng.gen_range(0..=15)).collect())
        } else {
            None
        };
        let bytes = dbe::interleave_pair(&first, second.as_deref(), g);
        let (a, b) = dbe::deinterleave_pair(&bytes);
        assert_eq!(a, first, "interleave not an inverse (case {i})");
        assert_eq!(
            b,
            second.unwrap_or_else(|| vec![0; g]),
            "interleave not an inverse (case {i})"
        );
        checked += 1;
    }
    report(
        "9 nibble codec inverses",
        checked == 100_000,
        &format!("{checked} randomized groups: decompose/recompose and interleave/deinterleave identities hold"),
    );
}
