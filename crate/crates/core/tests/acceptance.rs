// Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
// exits non-zero if any failed. Oracles here are computed independently of
// the library code they check.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use caption_forge::analysis::{unigram_entropy, zipf_fit};
use caption_forge::cli::demo_naive_agent;
use caption_forge::dataset::{expand, read_records, CaptionRecord, TrainingExample};
use caption_forge::decoder::{beam_search, greedy_select, score_candidate, BeamConfig};
use caption_forge::embedding::{mock_embed, EmbeddingStore, ImageEmbedding};
use caption_forge::metrics::{bleu_n, modified_precision, rouge_l, RougeMode};
use caption_forge::neural::{train, ArchitectureKind, ArchitectureSpec, ModelParameters, NeuralModel, TrainConfig};
use caption_forge::scorer::{RandomTableScorer, Scorer};
use caption_forge::synthetic::topic_corpus;
use caption_forge::text::{normalize_caption, EncodedCaption, TokenSequence, Vocabulary, END_INDEX};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

// 1
fn normalization_examples() -> Outcome {
    let cases = [
        ("Sweet & Spicy!", "<startseq> sweet and spicy <endseq>"),
        ("gruyère soufflé", "<startseq> gruyere souffle <endseq>"),
        ("see www.menu1.com, table 12", "<startseq> see website table num <endseq>"),
        ("2 slices for $5.99", "<startseq> num slices for num <endseq>"),
        ("", "<startseq> <endseq>"),
    ];
    for (raw, want) in cases {
        let got = normalize_caption(raw);
        check(got.tokens() == words(want).as_slice(), || format!("{raw:?} -> {got}, want {want}"))?;
    }
    Ok(format!("{} inputs bit-exact", cases.len()))
}

// 2
fn expansion_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alphabet = ["pizza", "beer", "patio", "menu", "cheese", "bar", "wine", "table"];
    let records: Vec<CaptionRecord> = (0..1000)
        .map(|i| {
            let n = rng.gen_range(0..25);
            let ws: Vec<&str> = (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
            CaptionRecord::new(format!("c{i}"), TokenSequence::from_words(ws).unwrap(), None).unwrap()
        })
        .collect();
    let vocab = Vocabulary::build(records.iter().map(|r| &r.tokens), 1).map_err(err)?;
    let (mut total, mut closed_form) = (0usize, 0usize);
    for r in &records {
        let toks: Vec<usize> = r.tokens.tokens().iter().map(|t| vocab.index_of(t).unwrap()).collect();
        let want = toks.len().min(15) - 1;
        let got = expand(r, &vocab, 15);
        check(got.len() == want, || format!("{}: {} examples, want {want}", r.photo_id, got.len()))?;
        for (k, ex) in got.iter().enumerate() {
            check(ex.prefix.tokens() == &toks[..=k] && ex.target == toks[k + 1], || {
                format!("{} example {k} has wrong prefix/target", r.photo_id)
            })?;
        }
        total += got.len();
        closed_form += toks.len().min(15) - 1;
    }
    check(total == closed_form, || format!("{total} != {closed_form}"))?;
    Ok(format!("1000 captions, {total} examples ({:.2}/caption)", total as f64 / 1000.0))
}

// 3
fn greedy_beam_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    for i in 0..100 {
        let v = rng.gen_range(4..40);
        let scorer = RandomTableScorer::with_temperature(v, rng.gen(), rng.gen_range(0.2..2.0));
        let img = mock_embed(&format!("img{i}"), 8, 3);
        let max_len = rng.gen_range(1..=15);
        let greedy = greedy_select(&scorer, &img, max_len).map_err(err)?;
        let beam = beam_search(&scorer, &img, &BeamConfig::greedy(max_len)).map_err(err)?;
        if beam[0].tokens == greedy {
            agree += 1;
        }
    }
    check(agree == 100, || format!("{agree}/100 agree"))?;
    Ok("100/100 scorers agree token-for-token".into())
}

// 4
fn brute_force(scorer: &dyn Scorer, img: &ImageEmbedding, max_len: usize, alpha: f64) -> (Vec<usize>, f64) {
    fn walk(
        scorer: &dyn Scorer,
        img: &ImageEmbedding,
        max_len: usize,
        alpha: f64,
        toks: &mut Vec<usize>,
        omegas: &mut Vec<f64>,
        best: &mut (Vec<usize>, f64),
    ) {
        let finished = toks.last() == Some(&END_INDEX);
        if finished || omegas.len() == max_len {
            let s: f64 = omegas.iter().enumerate().map(|(t, w)| w * alpha.powi(t as i32 + 1)).sum();
            if s > best.1 {
                *best = (toks.clone(), s);
            }
            return;
        }
        let dist = scorer
            .predict_next(img, &EncodedCaption::from_indices(toks, max_len.max(toks.len())))
            .unwrap();
        for (tok, &p) in dist.probs().iter().enumerate() {
            if p > 0.0 {
                toks.push(tok);
                omegas.push(p);
                walk(scorer, img, max_len, alpha, toks, omegas, best);
                toks.pop();
                omegas.pop();
            }
        }
    }
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    walk(scorer, img, max_len, alpha, &mut vec![1], &mut Vec::new(), &mut best);
    best
}

fn beam_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let instances = 60;
    for i in 0..instances {
        let v = rng.gen_range(4..=7); // at most 5 emittable tokens
        let scorer = RandomTableScorer::with_temperature(v, rng.gen(), rng.gen_range(0.3..2.0));
        let img = mock_embed(&format!("bf{i}"), 4, 4);
        let max_len = rng.gen_range(1..=4);
        let alpha = rng.gen_range(0.05..=1.0);
        let (want, want_score) = brute_force(&scorer, &img, max_len, alpha);
        let cfg = BeamConfig {
            beta: 5usize.pow(4),
            kappa: v,
            alpha,
            max_len,
        };
        let got = beam_search(&scorer, &img, &cfg).map_err(err)?;
        check(got[0].tokens == want && (got[0].score - want_score).abs() < 1e-12, || {
            format!("instance {i}: beam {:?} ({}) vs brute force {want:?} ({want_score})", got[0].tokens, got[0].score)
        })?;
    }
    Ok(format!("{instances}/{instances} instances match the exhaustive argmax"))
}

// 5
fn discounted_score() -> Outcome {
    let s = score_candidate(&[0.9, 0.8], 0.6).map_err(err)?;
    check((s - 0.828).abs() <= 1e-12, || format!("score {s}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.gen_range(1..16);
        let omegas: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let a = rng.gen_range(0.01..0.99);
        let b = rng.gen_range(a + 1e-3..=1.0);
        let (sa, sb) = (score_candidate(&omegas, a).map_err(err)?, score_candidate(&omegas, b).map_err(err)?);
        check(sa < sb, || format!("score not increasing: alpha {a} -> {sa}, {b} -> {sb}"))?;
    }
    Ok(format!("score = {s:.15}; strictly increasing in alpha on 1000 vectors"))
}

// 6
fn gradient_checks() -> Outcome {
    let (v, hidden, max_len, image_dim) = (12, 8, 5, 6);
    let mut store = EmbeddingStore::new(image_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut batch = Vec::new();
    for n in 0..4 {
        let id = format!("g{n}");
        store.insert(id.clone(), mock_embed(&id, image_dim, 6)).map_err(err)?;
        let len = rng.gen_range(0..max_len);
        let prefix: Vec<usize> = std::iter::once(1).chain((0..len).map(|_| rng.gen_range(2..v))).collect();
        batch.push(TrainingExample {
            photo_id: id,
            prefix: EncodedCaption::from_indices(&prefix, max_len),
            target: rng.gen_range(2..v),
        });
    }
    let mut worst_all = Vec::new();
    for kind in ArchitectureKind::ALL {
        let spec = ArchitectureSpec {
            max_len,
            ..ArchitectureSpec::uniform(kind, hidden, v, image_dim)
        };
        let model = NeuralModel::build(spec, 60).map_err(err)?;
        let (_, grad) = model.gradient(&batch, &store).map_err(err)?;
        let h = 1e-4;
        let mut probe = model.clone();
        let mut worst: f64 = 0.0;
        for t in 0..ModelParameters::TENSOR_NAMES.len() {
            for i in 0..grad.tensors()[t].len() {
                let orig = model.params.tensors()[t][i];
                probe.params.tensors_mut()[t][i] = orig + h;
                let up = probe.loss(&batch, &store).map_err(err)?;
                probe.params.tensors_mut()[t][i] = orig - h;
                let down = probe.loss(&batch, &store).map_err(err)?;
                probe.params.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grad.tensors()[t][i];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                check(rel.is_finite(), || format!("{kind}: non-finite gradient in {}", ModelParameters::TENSOR_NAMES[t]))?;
                worst = worst.max(rel);
            }
        }
        check(worst < 1e-4, || format!("{kind}: max relative error {worst:e}"))?;
        worst_all.push(format!("{kind} {worst:.1e}"));
    }
    Ok(format!("max relative error: {}", worst_all.join(", ")))
}

// 7
fn overfit() -> Outcome {
    let (v, image_dim) = (12, 8);
    let mut store = EmbeddingStore::new(image_dim);
    let mut batch = Vec::new();
    for n in 0..8usize {
        let id = format!("o{n}");
        store.insert(id.clone(), mock_embed(&id, image_dim, 7)).map_err(err)?;
        let prefix: Vec<usize> = std::iter::once(1).chain((0..n % 4).map(|k| 4 + (n + k) % 8)).collect();
        batch.push(TrainingExample {
            photo_id: id,
            prefix: EncodedCaption::from_indices(&prefix, 5),
            target: 2 + (n * 3) % 10,
        });
    }
    let mut notes = Vec::new();
    for kind in ArchitectureKind::ALL {
        let spec = ArchitectureSpec {
            max_len: 5,
            ..ArchitectureSpec::uniform(kind, 16, v, image_dim)
        };
        let cfg = TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 1,
            max_epochs: 200,
            patience: None,
            seed: 7,
            ..TrainConfig::default()
        };
        let start = Instant::now();
        let out = train(spec, &batch, &batch, &store, &cfg).map_err(err)?;
        let elapsed = start.elapsed();
        let hit = out.history.iter().find(|e| e.train_loss < 0.05);
        check(hit.is_some(), || format!("{kind}: final loss {:.4}", out.history.last().unwrap().train_loss))?;
        check(elapsed < Duration::from_secs(60), || format!("{kind}: took {elapsed:?}"))?;
        notes.push(format!("{kind} below 0.05 at epoch {} ({elapsed:.1?})", hit.unwrap().epoch));
    }
    Ok(notes.join(", "))
}

// 8
fn parameter_halving() -> Outcome {
    let count = |kind| {
        NeuralModel::build(ArchitectureSpec::full_size(kind, 30012, 16), 0)
            .map(|m| m.params.output_weight.len())
            .map_err(err)
    };
    let (concat, add) = (count(ArchitectureKind::MergeConcat)?, count(ArchitectureKind::MergeAdd)?);
    check(concat == 512 * 30012 && add * 2 == concat, || format!("concat {concat}, add {add}"))?;
    Ok(format!("output weights: merge-concat {concat}, merge-add {add}"))
}

// 9
fn metric_oracles() -> Outcome {
    let b1 = bleu_n(&[words("the cat")], &[words("the cat sat")], 1).map_err(err)?;
    check((b1 - (-0.5f64).exp()).abs() <= 1e-9, || format!("BLEU-1 {b1}"))?;
    let (m, t) = modified_precision(&[words("the the the")], &[words("the cat")], 1);
    check(m * 3 == t, || format!("clipped precision {m}/{t}"))?;
    let r = rouge_l(&[words("the cat")], &[words("the cat sat")], RougeMode::Recall).map_err(err)?;
    let f = rouge_l(&[words("the cat")], &[words("the cat sat")], RougeMode::F1).map_err(err)?;
    check((r - 2.0 / 3.0).abs() <= 1e-12 && (f - 0.8).abs() <= 1e-12, || format!("ROUGE-L r {r} f1 {f}"))?;
    let corpus = vec![words("a cheese pizza on a plate"), words("the patio at night"), words("two beers")];
    for n in 1..=2 {
        let s = bleu_n(&corpus, &corpus, n).map_err(err)?;
        check(s == 1.0, || format!("self BLEU-{n} {s}"))?;
    }
    let long = vec![words("a cheese pizza on a plate"), words("the patio at night")];
    for n in 3..=4 {
        let s = bleu_n(&long, &long, n).map_err(err)?;
        check(s == 1.0, || format!("self BLEU-{n} {s}"))?;
    }
    for mode in [RougeMode::Recall, RougeMode::F1] {
        let s = rouge_l(&corpus, &corpus, mode).map_err(err)?;
        check(s == 1.0, || format!("self ROUGE-L {s}"))?;
    }
    Ok(format!("BLEU-1 {b1:.12}, p1 {m}/{t}, ROUGE-L recall {r:.12} f1 {f:.12}"))
}

// 10
fn naive_agent() -> Outcome {
    let cfg = BeamConfig {
        alpha: 0.6,
        beta: 2,
        kappa: 2,
        max_len: 15,
    };
    let report = demo_naive_agent(&cfg).map_err(err)?;
    let hits = report.population.iter().filter(|c| *c == "chicken and waffles").count();
    check(hits == 1, || format!("population {:?}", report.population))?;
    let out = Command::new(env!("CARGO_BIN_EXE_caption-forge"))
        .arg("demo-naive-agent")
        .output()
        .map_err(err)?;
    let text = String::from_utf8_lossy(&out.stdout);
    let final_pop = text.split("final population:").nth(1).unwrap_or("");
    check(out.status.success() && final_pop.lines().any(|l| l.trim() == "chicken and waffles"), || {
        "demo-naive-agent output lacks the caption".into()
    })?;
    Ok(format!("final population {:?}", report.population))
}

// 11
fn zipf() -> Outcome {
    let fit = zipf_fit(&[1000, 500, 333, 250, 200]).map_err(err)?;
    check((fit.slope + 1.0).abs() <= 0.01 && fit.r_squared > 0.999, || format!("{fit:?}"))?;
    Ok(format!("slope {:.4}, r^2 {:.6}", fit.slope, fit.r_squared))
}

// 12 and 13
fn pipeline(dir: &Path, seed: u64) -> Result<(), String> {
    let mut raw = String::new();
    for r in topic_corpus(500, 12) {
        let line = serde_json::json!({ "photo_id": r.photo_id, "caption": r.tokens.words().join(" "), "label": r.label });
        raw.push_str(&format!("{line}\n"));
    }
    fs::write(dir.join("captions.jsonl"), raw).map_err(err)?;
    let seed = seed.to_string();
    let steps: [&[&str]; 6] = [
        &["preprocess", "--in", "captions.jsonl", "--out", "tokens.jsonl"],
        &["split", "--in", "tokens.jsonl", "--fraction", "0.2", "--train-out", "train.jsonl", "--val-out", "val.jsonl"],
        &["mock-embed", "--in", "tokens.jsonl", "--out", "images.nice", "--dim", "16", "--cluster-noise", "0.2"],
        &[
            "train-neural", "--train", "train.jsonl", "--val", "val.jsonl", "--vocab", "tokens.vocab", "--embeddings",
            "images.nice", "--out", "model.nicm", "--arch", "merge-concat", "--dim", "32", "--batch-size", "16",
            "--max-epochs", "30", "--history-out", "history.csv",
        ],
        &[
            "caption", "--model", "model.nicm", "--vocab", "tokens.vocab", "--embeddings", "images.nice", "--ids",
            "val.jsonl", "--out", "predictions.jsonl", "--jobs", "4",
        ],
        &[
            "evaluate", "--predictions", "predictions.jsonl", "--references", "val.jsonl", "--group-by-label",
            "--json-out", "report.json", "--name", "merge-concat", "--alpha", "0.6", "--jobs", "4",
        ],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_caption-forge"))
            .current_dir(dir)
            .env_remove("CAPTION_FORGE_SEED")
            .args(["--seed", &seed])
            .args(args)
            .output()
            .map_err(err)?;
        check(out.status.success(), || format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)))?;
        if args[0] == "evaluate" {
            fs::write(dir.join("report.txt"), &out.stdout).map_err(err)?;
        }
    }
    Ok(())
}

fn end_to_end(dir: &Path) -> Outcome {
    let start = Instant::now();
    pipeline(dir, 2024)?;
    let elapsed = start.elapsed();

    let vocab = Vocabulary::load(dir.join("tokens.vocab")).map_err(err)?;
    let content = vocab.len() - 4;
    check(content == 50, || format!("corpus has {content} content tokens"))?;
    let expand_file = |name: &str| -> Result<Vec<TrainingExample>, String> {
        let recs = read_records(dir.join(name)).map_err(err)?;
        Ok(recs.iter().flat_map(|r| expand(r, &vocab, 15)).collect())
    };
    let (train_ex, val_ex) = (expand_file("train.jsonl")?, expand_file("val.jsonl")?);
    let all: Vec<TrainingExample> = train_ex.iter().chain(&val_ex).cloned().collect();
    let baseline = unigram_entropy(&all).map_err(err)?;

    let model = NeuralModel::load(dir.join("model.nicm")).map_err(err)?;
    let store = EmbeddingStore::load(dir.join("images.nice")).map_err(err)?;
    let val_loss = model.loss(&val_ex, &store).map_err(err)?;
    let epochs = fs::read_to_string(dir.join("history.csv")).map_err(err)?.lines().count() - 1;
    check(epochs <= 30, || format!("{epochs} epochs"))?;
    check(val_loss < baseline, || format!("validation loss {val_loss:.4} >= unigram entropy {baseline:.4}"))?;

    let table = fs::read_to_string(dir.join("report.txt")).map_err(err)?;
    for col in ["BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "Terms Generated", "Average Caption Token Length"] {
        check(table.contains(col), || format!("report lacks {col}"))?;
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).map_err(err)?).map_err(err)?;
    check(json["count"] == 100, || format!("report covers {} images", json["count"]))?;
    check(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "val loss {val_loss:.4} < unigram entropy {baseline:.4} after {epochs} epochs; {elapsed:.1?}"
    ))
}

fn determinism(first: &Path) -> Outcome {
    let second = tempfile::tempdir().map_err(err)?;
    pipeline(second.path(), 2024)?;
    let files = ["model.nicm", "predictions.jsonl", "report.json", "report.txt", "history.csv"];
    for f in files {
        let (a, b) = (fs::read(first.join(f)).map_err(err)?, fs::read(second.path().join(f)).map_err(err)?);
        check(a == b, || format!("{f} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical", files.len()))
}

fn main() {
    let first = tempfile::tempdir().expect("temp dir");
    let first_path = first.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("normalization examples", Box::new(normalization_examples)),
        ("expansion law", Box::new(expansion_law)),
        ("greedy/beam equivalence", Box::new(greedy_beam_equivalence)),
        ("beam optimality oracle", Box::new(beam_optimality)),
        ("discounted score values", Box::new(discounted_score)),
        ("gradient checks", Box::new(gradient_checks)),
        ("overfit oracle", Box::new(overfit)),
        ("parameter halving", Box::new(parameter_halving)),
        ("metric oracles", Box::new(metric_oracles)),
        ("naive agent", Box::new(naive_agent)),
        ("zipf oracle", Box::new(zipf)),
        ("end-to-end desk run", Box::new(move || end_to_end(&first_path))),
        ("determinism", Box::new({
            let p = first.path().to_path_buf();
            move || determinism(&p)
        })),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    drop(first);
    if failed > 0 {
        std::process::exit(1);
    }
}
