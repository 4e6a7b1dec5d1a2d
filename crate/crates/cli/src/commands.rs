use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shareprefill::bench::run_bench;
use shareprefill::cluster::{
    attention_pattern_mask, cluster_records, embedder_by_id, jaccard_similarity_matrix, load_head_dict, read_amap,
    record_calibration, save_head_dict, write_amap, AmapFile, AttentionMapRecord,
};
use shareprefill::pattern::pooling_estimate_diagnostic;
use shareprefill::pgm::{heatmap_to_pgm, mask_to_pgm, write_file};
use shareprefill::pipeline::{compute_metrics, run_prefill};
use shareprefill::{Config, HeadDict, Result, SynthModel};

fn out_dir(config: &Config) -> Result<&Path> {
    fs::create_dir_all(&config.out)?;
    Ok(&config.out)
}

fn calibration_records(config: &Config) -> Result<Vec<AttentionMapRecord>> {
    let mut spec = config.model.clone();
    spec.input_seed = config.calibration.input_seed;
    let model = SynthModel::new(spec)?;
    let inputs: Vec<_> = model.heads().map(|(l, h)| (l, h, model.head_input(l, h))).collect();
    let refs: Vec<_> = inputs.iter().map(|(l, h, i)| (*l, *h, i)).collect();
    record_calibration(&refs, config.calibration.resolution)
}

fn build_dict(config: &Config, records: &[AttentionMapRecord]) -> Result<HeadDict> {
    let embedder = embedder_by_id(&config.calibration.embedder)?;
    cluster_records(records, embedder.as_ref(), &config.cluster)
}

pub fn calibrate(config: &Config) -> Result<()> {
    let records = calibration_records(config)?;
    let path = out_dir(config)?.join("calibration.amap");
    write_amap(&AmapFile::from_records(&records)?, &path)?;
    println!("wrote {} maps at resolution {} to {}", records.len(), config.calibration.resolution, path.display());
    Ok(())
}

pub fn cluster(config: &Config, amap: Option<PathBuf>) -> Result<()> {
    let amap = amap.unwrap_or_else(|| config.out.join("calibration.amap"));
    let records = read_amap(&amap)?.to_records();
    let mut dict = build_dict(config, &records)?;
    dict.meta_mut().calibration = Some(amap.display().to_string());
    let path = out_dir(config)?.join("head_dict.json");
    save_head_dict(&dict, &path)?;
    let noise = dict.members(dict.noise_cluster_id()).len();
    println!(
        "{} heads, {} clusters, {} noise heads; wrote {}",
        dict.len(),
        dict.num_clusters() - (noise > 0) as usize,
        noise,
        path.display()
    );
    Ok(())
}

pub fn prefill(config: &Config, head_dict: Option<PathBuf>) -> Result<()> {
    let default_dict = config.out.join("head_dict.json");
    let dict = match head_dict {
        Some(path) => load_head_dict(path)?,
        None if default_dict.exists() => load_head_dict(&default_dict)?,
        None => {
            info!("no head dictionary found, clustering a calibration pass in memory");
            build_dict(config, &calibration_records(config)?)?
        }
    };
    let model = SynthModel::new(config.model.clone())?;
    let run = run_prefill(&model, &dict, &config.thresholds, config.mode)?;
    run.trace.check_invariants()?;

    let out = out_dir(config)?;
    run.trace.save(out.join("trace.json"))?;
    let metrics = compute_metrics(&run.trace);
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    if config.dump_masks {
        let masks = out.join("masks");
        fs::create_dir_all(&masks)?;
        for (h, mask) in run.trace.heads.iter().zip(&run.masks) {
            write_file(masks.join(format!("l{}_h{}.pgm", h.layer, h.head)), &mask_to_pgm(mask))?;
        }
    }

    let c = metrics.counts;
    println!("heads: {} dense, {} shared, {} vertical-slash", c.dense, c.shared, c.vertical_slash);
    println!("density: {:.4}", metrics.density);
    if let Some(e) = metrics.rel_error {
        println!("rel error: mean {:.3e}, p90 {:.3e}, max {:.3e}", e.mean, e.p90, e.max);
    }
    println!("wall clock: {:.1} ms", run.trace.aggregate.wall_clock_ms);
    Ok(())
}

pub fn bench(config: &Config) -> Result<()> {
    let report = run_bench(&config.bench)?;
    let out = out_dir(config)?;
    fs::write(out.join("bench.json"), serde_json::to_string_pretty(&report)?)?;
    let csv = report.to_csv();
    fs::write(out.join("bench.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn diagnose_pooling(config: &Config, random: usize) -> Result<()> {
    println!("case,pooled,true_mean,all_pairs,causal_pairs,sign");
    let examples: [(&str, [f64; 3], [f64; 3]); 2] =
        [("misaligned", [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]), ("smoothed", [0.0, 0.0, 1.0], [0.0, -1.0, 1.0])];
    let row = |name: &str, q: &[f64], k: &[f64]| -> Result<i8> {
        let d = pooling_estimate_diagnostic(q, k)?;
        println!(
            "{name},{:.6},{:.6},{:.6},{:.6},{:+}",
            d.pooled_product,
            d.true_block_mean,
            d.all_pairs_mean,
            d.causal_pairs_mean,
            d.estimate_sign()
        );
        Ok(d.estimate_sign())
    };
    for (name, q, k) in &examples {
        row(name, q, k)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.model.seed);
    let mut signs = [0usize; 3];
    for i in 0..random {
        let n = rng.random_range(2..=16);
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = if i < 10 { row(&format!("random{i}"), &q, &k)? } else { pooling_estimate_diagnostic(&q, &k)?.estimate_sign() };
        signs[(s + 1) as usize] += 1;
    }
    if random > 0 {
        println!("# {random} random cases: {} over, {} under, {} exact", signs[2], signs[0], signs[1]);
    }
    Ok(())
}

pub fn similarity(config: &Config) -> Result<()> {
    let model = SynthModel::new(config.model.clone())?;
    let masks = model
        .heads()
        .map(|(l, h)| attention_pattern_mask(&model.head_input(l, h), config.model.block_size, config.thresholds.gamma))
        .collect::<Result<Vec<_>>>()?;
    let matrix = jaccard_similarity_matrix(&masks)?;
    let out = out_dir(config)?;
    fs::write(out.join("similarity.csv"), matrix.to_csv())?;
    write_file(out.join("similarity.pgm"), &heatmap_to_pgm(&matrix.values)?)?;
    println!("wrote {0}x{0} similarity matrix to {1}", matrix.len(), out.display());
    Ok(())
}
