use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crackscope_core::attention::{
    cam_weights, cbam_forward, demo_stages, eca_forward, eca_weights, sam_map, sppf_forward, CamParams, CbamParams, DemoParams,
    EcaParams, SamParams, SppfParams, DEFAULT_REDUCTION,
};
use crackscope_core::io::{
    pr_csv, read_pgm, read_predictions, split_dataset, to_json_document, DatasetIndex, DetectionRecord, IndexEntry, LabelRecord,
    MetricsSummary, SplitSpec, WidthDocument,
};
use crackscope_core::io::polygon_to_mask;
use crackscope_core::mask::{analyze_mask, threshold_mask, BinaryMask, BorderMode, ScaleConfig};
use crackscope_core::metrics::{
    accuracy, average_precision, match_records, pixel_confusion, pr_curve, precision, recall, ConfusionCounts, MatchMode, ScoredFlag,
};
use crackscope_core::verify::{gradient_suite, run_target, SuiteConfig, TARGETS};
use crackscope_core::Tensor64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use clap::ValueEnum;
use rayon::prelude::*;

use crate::output::{emit, read_bytes, read_text, write_atomic, CliError};
use crate::{AnalyzeArgs, Block, Border, DemoArgs, EvalArgs, EvalMode, GradcheckArgs, MatchGeometry, SplitArgs};

fn image_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn width_document(path: &Path, threshold: u8, scale: ScaleConfig, border: BorderMode) -> Result<WidthDocument, CliError> {
    let wrap = |e: crackscope_core::Error| CliError::Validation(format!("{}: {e}", path.display()));
    let gray = read_pgm(&read_bytes(path)?).map_err(wrap)?;
    let mask = threshold_mask(&gray, threshold).map_err(wrap)?;
    let components = analyze_mask(&mask, scale, border).map_err(wrap)?;
    Ok(WidthDocument { image: image_name(path), mm_per_px: scale.mm_per_px(), components })
}

pub fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let scale = ScaleConfig::new(a.scale_mm_per_px)?;
    let border = match a.border {
        Border::Background => BorderMode::Background,
        Border::Ignore => BorderMode::Ignore,
    };
    let docs: Vec<WidthDocument> =
        a.mask.par_iter().map(|p| width_document(p, a.threshold, scale, border)).collect::<Result<_, _>>()?;
    if docs.len() == 1 {
        return emit(a.out.as_deref(), &to_json_document(&docs[0]));
    }
    match a.out {
        None => emit(None, &to_json_document(&docs)),
        Some(dir) => {
            if !dir.is_dir() {
                return Err(CliError::Validation(format!("{}: several masks need an existing output directory", dir.display())));
            }
            let mut seen = BTreeSet::new();
            for d in &docs {
                if !seen.insert(d.image.as_str()) {
                    return Err(CliError::Validation(format!("two masks share the name `{}`", d.image)));
                }
            }
            docs.iter().try_for_each(|d| write_atomic(&dir.join(format!("{}.json", d.image)), to_json_document(d).as_bytes()))
        }
    }
}

/// Predictions grouped by image id, input order kept within each image.
fn group_predictions(preds: Vec<DetectionRecord>, index: &DatasetIndex) -> Result<BTreeMap<String, Vec<DetectionRecord>>, CliError> {
    let mut by_image: BTreeMap<String, Vec<DetectionRecord>> = BTreeMap::new();
    for p in preds {
        by_image.entry(p.image.clone()).or_default().push(p);
    }
    let unknown: Vec<&str> = by_image.keys().filter(|id| index.get(id).is_none()).map(String::as_str).collect();
    if !unknown.is_empty() {
        return Err(CliError::Validation(format!(
            "{} prediction image id(s) have no ground truth: {}",
            unknown.len(),
            unknown.join(", ")
        )));
    }
    Ok(by_image)
}

struct ImageOutcome {
    counts: ConfusionCounts,
    flags: Vec<ScoredFlag>,
}

fn instance_outcome(entry: &IndexEntry, preds: &[DetectionRecord], iou: f64, geometry: MatchGeometry) -> Result<ImageOutcome, CliError> {
    let mode = match geometry {
        MatchGeometry::Box => MatchMode::Box,
        MatchGeometry::Mask => MatchMode::Mask { width: entry.width, height: entry.height },
    };
    let classes: BTreeSet<u32> = preds.iter().map(|p| p.class_id).chain(entry.labels.iter().map(|l| l.class_id)).collect();
    let mut counts = ConfusionCounts::default();
    let mut flags = Vec::new();
    // detections only match labels of their own class
    for class in classes {
        let p: Vec<DetectionRecord> = preds.iter().filter(|r| r.class_id == class).cloned().collect();
        let g: Vec<LabelRecord> = entry.labels.iter().filter(|l| l.class_id == class).cloned().collect();
        let m = match_records(&p, &g, iou, mode).map_err(|e| CliError::Validation(format!("image {}: {e}", entry.id)))?;
        let scores: Vec<f64> = p.iter().map(|r| r.score).collect();
        counts = counts + m.counts();
        flags.extend(m.scored_flags(&scores));
    }
    Ok(ImageOutcome { counts, flags })
}

fn box_polygon(r: &DetectionRecord) -> Option<Vec<[f64; 2]>> {
    r.bbox.map(|b| {
        let (x1, y1, x2, y2) = b.corners();
        vec![[x1, y1], [x2, y1], [x2, y2], [x1, y2]]
    })
}

fn union_mask<'a>(polys: impl Iterator<Item = &'a [[f64; 2]]>, width: usize, height: usize) -> crackscope_core::Result<BinaryMask> {
    let mut acc = BinaryMask::empty(height, width);
    for poly in polys {
        let m = polygon_to_mask(poly, width, height)?.mask;
        for (r, c) in m.foreground() {
            acc.set(r, c, true);
        }
    }
    Ok(acc)
}

fn pixel_outcome(entry: &IndexEntry, preds: &[DetectionRecord]) -> Result<ImageOutcome, CliError> {
    let wrap = |e: crackscope_core::Error| CliError::Validation(format!("image {}: {e}", entry.id));
    let pred_polys: Vec<Vec<[f64; 2]>> = preds.iter().filter_map(|r| r.polygon.clone().or_else(|| box_polygon(r))).collect();
    let pred = union_mask(pred_polys.iter().map(Vec::as_slice), entry.width, entry.height).map_err(wrap)?;
    let gt = union_mask(entry.labels.iter().map(|l| l.polygon.as_slice()), entry.width, entry.height).map_err(wrap)?;
    Ok(ImageOutcome { counts: pixel_confusion(&pred, &gt).map_err(wrap)?, flags: Vec::new() })
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    if !(a.iou > 0.0 && a.iou <= 1.0) {
        return Err(CliError::Validation(format!("--iou must lie in (0, 1], got {}", a.iou)));
    }
    if a.mode == EvalMode::Pixel && a.pr_out.is_some() {
        return Err(CliError::Validation("--pr-out needs --mode instance".into()));
    }
    let index = DatasetIndex::scan(&a.gt, (a.width, a.height))?;
    if index.entries.is_empty() {
        return Err(CliError::Validation(format!("{}: no label files found", a.gt.display())));
    }
    let preds = read_predictions(&read_text(&a.pred)?).map_err(|e| CliError::Validation(format!("{}: {e}", a.pred.display())))?;
    let by_image = group_predictions(preds, &index)?;

    let outcomes: Vec<ImageOutcome> = index
        .entries
        .par_iter()
        .map(|entry| {
            let preds = by_image.get(&entry.id).map(Vec::as_slice).unwrap_or(&[]);
            match a.mode {
                EvalMode::Instance => instance_outcome(entry, preds, a.iou, a.match_geometry),
                EvalMode::Pixel => pixel_outcome(entry, preds),
            }
        })
        .collect::<Result<_, _>>()?;
    let counts: ConfusionCounts = outcomes.iter().map(|o| o.counts).sum();

    let summary = match a.mode {
        EvalMode::Instance => {
            let flags: Vec<ScoredFlag> = outcomes.into_iter().flat_map(|o| o.flags).collect();
            let total_gt = index.total_instances();
            let curve = if total_gt > 0 { Some(pr_curve(&flags, total_gt)?) } else { None };
            if let Some(path) = &a.pr_out {
                let curve = curve.as_ref().ok_or_else(|| CliError::Validation("PR curve undefined without ground truth".into()))?;
                write_atomic(path, pr_csv(curve).as_bytes())?;
            }
            MetricsSummary {
                mode: "instance".into(),
                iou_threshold: a.iou,
                tp: counts.tp,
                fp: counts.fp,
                fn_: counts.fn_,
                tn: None,
                precision: precision(&counts).ok(),
                recall: recall(&counts).ok(),
                accuracy: None,
                ap: curve.as_ref().map(average_precision).transpose()?,
            }
        }
        EvalMode::Pixel => MetricsSummary {
            mode: "pixel".into(),
            iou_threshold: a.iou,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            tn: Some(counts.tn),
            precision: precision(&counts).ok(),
            recall: recall(&counts).ok(),
            accuracy: accuracy(&counts).ok(),
            ap: None,
        },
    };
    emit(a.out.as_deref(), &to_json_document(&summary))
}

pub fn split(a: SplitArgs) -> Result<(), CliError> {
    let text = read_text(&a.list)?;
    let items: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let spec = SplitSpec { train: a.train, val: a.val, test: a.test, seed: a.seed };
    let s = split_dataset(&items, spec)?;
    if !a.out_dir.is_dir() {
        return Err(CliError::Validation(format!("{}: not a directory", a.out_dir.display())));
    }
    for (name, part) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
        let mut body = part.join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        write_atomic(&a.out_dir.join(format!("{name}.txt")), body.as_bytes())?;
    }
    println!("train {} val {} test {}", s.train.len(), s.val.len(), s.test.len());
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    if !(a.eps > 0.0 && a.tol > 0.0) || a.cases == 0 {
        return Err(CliError::Validation("--eps and --tol must be positive and --cases at least 1".into()));
    }
    for t in &a.target {
        if !TARGETS.contains(&t.as_str()) {
            return Err(CliError::Validation(format!("unknown target `{t}`; known: {}", TARGETS.join(", "))));
        }
    }
    let cfg = SuiteConfig { seed: a.seed, cases: a.cases, eps: a.eps, tol: a.tol };
    let reports = if a.target.is_empty() {
        gradient_suite(&cfg)
    } else {
        a.target.iter().map(|t| run_target(t, &cfg)).collect()
    };
    for r in &reports {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {:<16} cases={} failures={} worst_rel_error={:.3e}", r.target, r.cases, r.failures, r.worst_rel_error);
    }
    if let Some(path) = &a.out {
        write_atomic(path, to_json_document(&reports).as_bytes())?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.target.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn stats(t: &Tensor64) -> String {
    let d = t.data();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    format!("min={min:.6} mean={mean:.6} max={max:.6}")
}

/// Largest `|y - factor * reference|`.
fn identity_error(y: &Tensor64, reference: &Tensor64, factor: f64) -> Result<f64, CliError> {
    y.max_abs_diff(&reference.scale(factor))
        .ok_or_else(|| CliError::Validation("identity check compared tensors of different shapes".into()))
}

pub fn attn_demo(a: DemoArgs) -> Result<(), CliError> {
    if a.channels == 0 || a.size == 0 {
        return Err(CliError::Validation("--channels and --size must be positive".into()));
    }
    let (c, s) = (a.channels, a.size);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let x = Tensor64::random_uniform([1, c, s, s], -1.0, 1.0, &mut rng);
    // (output, attention weights, zero-init output, expected factor, reference, params text)
    let (y, weights, y0, factor, reference, text) = match a.block {
        Block::Eca => {
            let p = EcaParams::random(c, &mut rng)?;
            let y0 = eca_forward(&x, &EcaParams::zeros(c)?)?;
            (eca_forward(&x, &p)?, Some(eca_weights(&x, &p)?), y0, 0.5, x.clone(), p.to_text())
        }
        Block::Cam => {
            let p = CamParams::random(c, DEFAULT_REDUCTION, &mut rng)?;
            let y0 = crackscope_core::attention::cam_forward(&x, &CamParams::zeros(c, DEFAULT_REDUCTION)?)?;
            let y = crackscope_core::attention::cam_forward(&x, &p)?;
            (y, Some(cam_weights(&x, &p)?), y0, 0.5, x.clone(), p.to_text())
        }
        Block::Sam => {
            let p = SamParams::random(&mut rng);
            let y0 = crackscope_core::attention::sam_forward(&x, &SamParams::zeros())?;
            let y = crackscope_core::attention::sam_forward(&x, &p)?;
            (y, Some(sam_map(&x, &p)?), y0, 0.5, x.clone(), p.to_text())
        }
        Block::Cbam => {
            let p = CbamParams::random(c, DEFAULT_REDUCTION, &mut rng)?;
            let z = CbamParams::zeros(c, DEFAULT_REDUCTION)?;
            let y0 = cbam_forward(&x, &z.cam, &z.sam)?;
            let text = format!("{}{}", p.cam.to_text(), p.sam.to_text());
            (cbam_forward(&x, &p.cam, &p.sam)?, Some(cam_weights(&x, &p.cam)?), y0, 0.25, x.clone(), text)
        }
        Block::Sppf => {
            let mid = (c / 2).max(1);
            let p = SppfParams::random(c, mid, c, &mut rng);
            // zero parameters give a zero output
            let y0 = sppf_forward(&x, &SppfParams::zeros(c, mid, c))?;
            (sppf_forward(&x, &p)?, None, y0, 0.0, x.clone(), p.to_text())
        }
        Block::Pipeline => {
            let p = DemoParams::random(c, c, c, a.seed)?;
            let z = DemoParams::zero_attention(c, c, c, a.seed)?;
            let st = demo_stages(&x, &z)?;
            // with zero attention ECA halves the stem and CBAM quarters that
            let y = demo_stages(&x, &p)?.output;
            let text = format!("{}{}{}{}", p.eca.to_text(), p.cbam.cam.to_text(), p.cbam.sam.to_text(), p.sppf.to_text());
            (y, None, st.cbam, 0.125, st.stem, text)
        }
    };
    println!("block {}", a.block.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default());
    println!("input  {}", x.shape());
    println!("output {} {}", y.shape(), stats(&y));
    if let Some(w) = weights {
        println!("weights {} {}", w.shape(), stats(&w));
    }
    let err = identity_error(&y0, &reference, factor)?;
    let ok = err <= 1e-12;
    println!("zero-init identity: y = {factor} * reference, max_abs_error={err:.3e} {}", if ok { "ok" } else { "MISMATCH" });
    if let Some(path) = &a.params_out {
        write_atomic(path, text.as_bytes())?;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!("zero-init identity failed with error {err:.3e}")))
    }
}

