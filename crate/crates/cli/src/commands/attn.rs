//! `attn`: private attention for every row of `Q`, written as a matrix file,
//! with a per-entry report against the exact layer.

use std::io::Write;
use std::time::Instant;

use dpxattn_core::attention::AttentionLayer;
use dpxattn_core::oracle::exact_attention;
use dpxattn_core::NoiseRng;

use super::{adaptive_det_bound, adaptive_info, elapsed_ms, emit, shape};
use crate::config::{AttnArgs, Mode, RunConfig};
use crate::dataset::{write_matrix, Dataset};
use crate::error::Result;
use crate::report::{Record, Report, StructureInfo};

pub fn run(args: &AttnArgs, out: &mut dyn Write) -> Result<Report> {
    let data = Dataset::load(&args.data)?;
    let mut cfg = RunConfig::new("attn", &args.privacy, &data);
    cfg.mode = Some(Mode::Attention);
    cfg.validate(args.privacy.unsafe_test)?;

    let start = Instant::now();
    let params = cfg.attention();
    let mut rng = NoiseRng::from_seed(cfg.seed);
    let layer = AttentionLayer::build(&data.keys, &data.values, &params, &mut rng)?;
    let output = layer.attend(&data.queries, cfg.alpha)?;
    let elapsed = elapsed_ms(start);
    write_matrix(&args.out, &output, cfg.weight_bound)?;

    let truth = exact_attention(&data.queries, &data.keys, &data.values)?;
    let n = data.n() as f64;
    let d = data.d() as f64;
    let mut report = Report::new(cfg.clone());
    for i in 0..data.m() {
        let q = data.queries.row(i);
        let weights: Vec<f64> = data
            .keys
            .iter_rows()
            .map(|k| (k.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / d).exp())
            .collect();
        for (c, column) in layer.columns().iter().enumerate() {
            let abs_num: f64 = weights.iter().zip(&data.values.column(c)).map(|(e, v)| e * v.abs()).sum();
            let allowance = (cfg.alpha + cfg.epsilon_s) * abs_num / n;
            let det = adaptive_det_bound(column, q, cfg.alpha)? / n;
            let mut r = Record::new("attention", 0, i, truth.get(i, c), output.get(i, c), allowance, det);
            r.column = Some(c);
            report.records.push(r);
        }
    }
    if args.output.timing {
        report.build_ms = Some(elapsed);
    }
    let sp = layer.structure_params().softmax;
    let first = &layer.columns()[0];
    report.structure = Some(StructureInfo {
        budget_parts: Some(params.budget_parts(data.d())),
        ..adaptive_info("attention", first, sp.epsilon, sp.delta, sp.delta_prime)
    });
    let kernel = first.copies()[0].kernel();
    let (r, gamma, l) = (kernel.features(), kernel.gamma(), first.len());
    report.summarize(|_| shape(&cfg, Mode::Attention, r, gamma, l));
    emit(&report, &args.output, out)?;
    writeln!(out, "output written to {}", args.out.display()).map_err(|e| crate::error::CliError::io("<stdout>", e))?;
    Ok(report)
}
