//! Command-line front end: validation of poset models, stratum complexes
//! with count tables, the discrete-Morse pipeline into Floer complexes with
//! the simplicial oracle comparison, continuation certificates, the
//! cup-product multimodule demo, and cubical-set checks.
//!
//! Exit codes: 0 success, 1 mathematical validation failure, 2 input error.
//! All runs are deterministic given the inputs and the seed.

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

use vfc_core::bimod;
use vfc_core::coeff::{parse_rat, BaseField, Rat};
use vfc_core::cubical;
use vfc_core::floer;
use vfc_core::flowcat;
use vfc_core::homalg;
use vfc_core::morse;
use vfc_core::report::Report;
use vfc_core::stratcx;
use vfc_core::stratmodel;
use vfc_core::trees;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Parser)]
#[command(name = "vfc", about = "exact-arithmetic flow categories, stratified models, and Floer complexes", version)]
struct Cli {
    /// Report format
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    /// Worker threads for internal parallelism (deterministic reductions)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a poset model, partitioned model, or refinement file
    ValidateModel { path: PathBuf },
    /// Build and validate a stratum complex file, with homology and counts
    StratumComplex {
        path: PathBuf,
        #[arg(long, default_value = "q")]
        field: String,
    },
    /// Discrete-Morse pipeline: flow category, Floer complex, d-squared,
    /// homology, and the simplicial oracle comparison
    Floer {
        /// facet-list file
        #[arg(long, required_unless_present = "flow_file")]
        complex: Option<PathBuf>,
        /// matching file; omit to generate one randomly
        #[arg(long)]
        matching: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "q")]
        field: String,
        /// grade the category by dimension gaps over the monoid Z
        #[arg(long)]
        graded: bool,
        /// run the full flow-category validation (slower)
        #[arg(long)]
        check: bool,
        /// load a raw flow-category file instead of a complex and matching
        #[arg(long, conflicts_with_all = ["complex", "matching"])]
        flow_file: Option<PathBuf>,
        /// write the Floer complex to a round-trippable file
        #[arg(long)]
        export: Option<PathBuf>,
        /// truncate the Novikov differential at this action level before
        /// the homology computation
        #[arg(long)]
        cutoff: Option<String>,
    },
    /// Continuation data between two matchings, with the invariance
    /// certificate
    Continuation {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long)]
        matching_a: PathBuf,
        #[arg(long)]
        matching_b: PathBuf,
        #[arg(long, default_value = "q")]
        field: String,
        /// certification cutoff for the energy induction
        #[arg(long, default_value = "10")]
        cutoff: String,
        #[arg(long)]
        graded: bool,
    },
    /// The cup-product multimodule of a matching, checked against the
    /// simplicial cohomology oracle over F_2; or validate a tree file
    Multimodule {
        #[arg(long, required_unless_present = "tree")]
        complex: Option<PathBuf>,
        #[arg(long)]
        matching: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// validate a labelled-tree file instead
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Validate a symmetric cubical set file, or the representable n-cube
    CubicalCheck {
        #[arg(long, required_unless_present = "representable")]
        file: Option<PathBuf>,
        #[arg(long)]
        representable: Option<usize>,
    },
    /// Simplicial homology of a facet-list file (the oracle)
    Homology {
        complex: PathBuf,
        /// q, f2, fp:N, or z for integral homology with torsion
        #[arg(long, default_value = "z")]
        ring: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_field(s: &str) -> Result<BaseField> {
    s.parse::<BaseField>().map_err(|e| anyhow!("{e}"))
}

fn report_json(report: &Report) -> serde_json::Value {
    json!({
        "status": if report.ok() { "pass" } else { "fail" },
        "findings": report.findings.iter().map(|f| json!({
            "location": f.location,
            "message": f.message,
        })).collect::<Vec<_>>(),
        "notes": report.notes,
    })
}

fn emit(format: Format, title: &str, report: &Report, extra: serde_json::Value) {
    match format {
        Format::Text => {
            print!("{title}: {report}");
            if let Some(map) = extra.as_object() {
                for (k, v) in map {
                    println!("{k}: {v}");
                }
            }
        }
        Format::Structured => {
            let mut value = report_json(report);
            value["command"] = json!(title);
            if let Some(map) = extra.as_object() {
                for (k, v) in map {
                    value[k] = v.clone();
                }
            }
            println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
        }
    }
}

fn verdict(report: &Report) -> ExitCode {
    if report.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::ValidateModel { path } => {
            let text = read(path)?;
            let parsed = stratmodel::parse_poset_file(&text).map_err(|e| anyhow!("{e}"))?;
            let (kind, report) = match parsed {
                stratmodel::PosetFile::Model(m) => ("model", stratmodel::validate_model(&m)),
                stratmodel::PosetFile::Partitioned(m) => {
                    ("partitioned model", stratmodel::validate_partitioned(&m).report)
                }
                stratmodel::PosetFile::Refinement(r) => {
                    ("refinement", stratmodel::validate_refinement(&r))
                }
            };
            emit(cli.format, &format!("validate-model ({kind})"), &report, json!({}));
            Ok(verdict(&report))
        }
        Command::StratumComplex { path, field } => {
            let field = parse_field(field)?;
            let text = read(path)?;
            let (data, table) =
                stratcx::parse_stratum_file(&text, field).map_err(|e| anyhow!("{e}"))?;
            let cx = stratcx::build_stratum_complex(&data, field).map_err(|e| anyhow!("{e}"))?;
            let mut report = homalg::cc_validate(&cx);
            let mut extra = json!({});
            if field == BaseField::Rationals {
                let h = homalg::homology_integral(&cx).map_err(|e| anyhow!("{e}"))?;
                extra["homology"] = json!(h
                    .iter()
                    .map(|(deg, (betti, torsion))| json!({
                        "degree": deg,
                        "betti": betti,
                        "torsion": torsion.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>());
            } else {
                let h = homalg::homology_field(&cx);
                extra["homology"] = json!(h
                    .iter()
                    .map(|(deg, betti)| json!({ "degree": deg, "betti": betti }))
                    .collect::<Vec<_>>());
            }
            if !table.entries.is_empty() {
                let (functional, count_report) =
                    stratcx::eval_counts(&data, &table).map_err(|e| anyhow!("{e}"))?;
                report.merge(count_report);
                extra["counts"] = json!(functional
                    .iter()
                    .map(|(k, v)| json!({ "stratum": k, "value": v.to_string() }))
                    .collect::<Vec<_>>());
            }
            emit(cli.format, "stratum-complex", &report, extra);
            Ok(verdict(&report))
        }
        Command::Floer {
            complex,
            matching,
            seed,
            field,
            graded,
            check,
            flow_file,
            export,
            cutoff,
        } => {
            let field = parse_field(field)?;
            let mode = if *graded {
                morse::ActionMode::DimensionGap
            } else {
                morse::ActionMode::Trivial
            };
            let mut report = Report::new();
            let mut extra = json!({});
            let (cat, oracle): (flowcat::FlowCategory, Option<morse::HomologySummary>) =
                if let Some(ff) = flow_file {
                    let cat =
                        flowcat::parse_flow_file(&read(ff)?).map_err(|e| anyhow!("{e}"))?;
                    (cat, None)
                } else {
                    let complex = complex.as_ref().expect("clap requires complex or flow-file");
                    let (k, warnings) =
                        morse::load_complex(&read(complex)?).map_err(|e| anyhow!("{e}"))?;
                    for w in warnings {
                        report.note(w);
                    }
                    let m = match matching {
                        Some(mp) => morse::parse_matching(&read(mp)?, &k)
                            .map_err(|e| anyhow!("{e}"))?,
                        None => morse::find_matching(&k, *seed),
                    };
                    extra["critical_cells"] = json!(m.critical_cells(&k).len());
                    let cat = morse::flow_category_from_morse(&k, &m, field, mode)
                        .map_err(|e| anyhow!("{e}"))?;
                    let oracle = morse::simplicial_homology(&k, morse::HomologyRing::Field(field));
                    (cat, Some(oracle))
                };
            if *check {
                report.merge(flowcat::validate_flow_category(&cat));
            }
            let mut cf = floer::build_cf(&cat).map_err(|e| anyhow!("{e}"))?;
            if let Some(level) = cutoff {
                let level = parse_rat(level).map_err(|e| anyhow!("{e}"))?;
                let bound = vfc_core::coeff::Cutoff::Finite(level);
                let mut diff = vfc_core::homalg::SparseMat::new();
                for ((i, j), v) in cf.complex.diff.iter() {
                    diff.set(*i, *j, v.truncate(bound.clone()));
                }
                cf.complex.diff = diff;
                cf.cutoff = cf.cutoff.clone().min(bound);
            }
            report.merge(floer::check_d_squared(&cf));
            match floer::cf_homology(&cf) {
                Ok(h) => {
                    extra["betti"] = json!(h
                        .iter()
                        .map(|(deg, rank)| json!({ "degree": deg, "rank": rank }))
                        .collect::<Vec<_>>());
                    extra["homology_certified"] = json!(true);
                }
                Err(e) => {
                    report.fail("homology", e.to_string());
                    extra["homology_certified"] = json!(false);
                }
            }
            let h: Option<std::collections::BTreeMap<i64, usize>> =
                floer::cf_homology(&cf).ok();
            if let (Some(oracle), Some(h)) = (oracle, h) {
                let mut agree = true;
                for (dim, (rank, _)) in oracle.groups.iter().enumerate() {
                    if h.get(&(dim as i64)).copied().unwrap_or(0) != *rank {
                        agree = false;
                        report.fail(
                            format!("degree {dim}"),
                            format!(
                                "Floer rank {} differs from the simplicial oracle rank {}",
                                h.get(&(dim as i64)).copied().unwrap_or(0),
                                rank
                            ),
                        );
                    }
                }
                extra["oracle_match"] = json!(agree);
            }
            if let Some(out) = export {
                std::fs::write(out, floer::cf_to_text(&cf))
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            emit(cli.format, "floer", &report, extra);
            Ok(verdict(&report))
        }
        Command::Continuation {
            complex,
            matching_a,
            matching_b,
            field,
            cutoff,
            graded,
        } => {
            let field = parse_field(field)?;
            let cutoff: Rat = parse_rat(cutoff).map_err(|e| anyhow!("{e}"))?;
            let mode = if *graded {
                morse::ActionMode::DimensionGap
            } else {
                morse::ActionMode::Trivial
            };
            let (k, _) = morse::load_complex(&read(complex)?).map_err(|e| anyhow!("{e}"))?;
            let ma = morse::parse_matching(&read(matching_a)?, &k).map_err(|e| anyhow!("{e}"))?;
            let mb = morse::parse_matching(&read(matching_b)?, &k).map_err(|e| anyhow!("{e}"))?;
            let data = morse::continuation_from_matchings(&k, &ma, &mb, field, mode)
                .map_err(|e| anyhow!("{e}"))?;
            let mut report = Report::new();
            for (cube, name) in [
                (&data.forward, "forward"),
                (&data.backward, "backward"),
                (&data.homotopy_source, "homotopy-source"),
                (&data.homotopy_target, "homotopy-target"),
            ] {
                let r = bimod::verify_chain_map_cube(cube).map_err(|e| anyhow!("{e}"))?;
                if !r.ok() {
                    report.fail(name, format!("{r}"));
                }
            }
            let cert = bimod::certify_invariance(
                &data.forward,
                &data.backward,
                &data.homotopy_source,
                &data.homotopy_target,
                &cutoff,
            )
            .map_err(|e| anyhow!("{e}"))?;
            report.merge(cert.report.clone());
            let h1 = floer::cf_homology(&floer::build_cf(&data.source).map_err(|e| anyhow!("{e}"))?)
                .map_err(|e| anyhow!("{e}"))?;
            let h2 = floer::cf_homology(&floer::build_cf(&data.target).map_err(|e| anyhow!("{e}"))?)
                .map_err(|e| anyhow!("{e}"))?;
            if h1 != h2 {
                report.fail("betti", "certified equivalence with unequal Betti numbers".to_string());
            }
            let extra = json!({
                "betti": h1.iter().map(|(deg, rank)| json!({"degree": deg, "rank": rank})).collect::<Vec<_>>(),
            });
            emit(cli.format, "continuation", &report, extra);
            Ok(verdict(&report))
        }
        Command::Multimodule {
            complex,
            matching,
            seed,
            tree,
        } => {
            if let Some(tp) = tree {
                let t = trees::parse_tree_file(&read(tp)?).map_err(|e| anyhow!("{e}"))?;
                let report = t.validate();
                emit(cli.format, "multimodule (tree)", &report, json!({}));
                return Ok(verdict(&report));
            }
            let complex = complex.as_ref().expect("clap requires complex or tree");
            let (k, _) = morse::load_complex(&read(complex)?).map_err(|e| anyhow!("{e}"))?;
            let m = match matching {
                Some(mp) => morse::parse_matching(&read(mp)?, &k).map_err(|e| anyhow!("{e}"))?,
                None => morse::find_matching(&k, *seed),
            };
            let cube = morse::cup_multimodule(&k, &m).map_err(|e| anyhow!("{e}"))?;
            let mut report = trees::verify_multimodule(&cube).map_err(|e| anyhow!("{e}"))?;
            let morse_rank =
                morse::multimodule_cup_rank(&cube, 1, 1).map_err(|e| anyhow!("{e}"))?;
            let oracle_rank = morse::simplicial_cup_rank(&k, 1, 1);
            if morse_rank != oracle_rank {
                report.fail(
                    "cup pairing",
                    format!("rank {morse_rank} differs from the simplicial oracle {oracle_rank}"),
                );
            }
            let extra = json!({
                "cup_rank": morse_rank,
                "oracle_rank": oracle_rank,
            });
            emit(cli.format, "multimodule", &report, extra);
            Ok(verdict(&report))
        }
        Command::CubicalCheck { file, representable } => {
            let set = if let Some(n) = representable {
                cubical::representable_cube(*n, (*n).min(3).max(1))
            } else {
                let path = file.as_ref().expect("clap requires file or representable");
                cubical::parse_cubical_file(&read(path)?).map_err(|e| anyhow!("{e}"))?
            };
            let report = cubical::cub_validate(&set);
            let extra = json!({
                "cubes_per_dimension": set.cubes.iter().map(|c| c.len()).collect::<Vec<_>>(),
            });
            emit(cli.format, "cubical-check", &report, extra);
            Ok(verdict(&report))
        }
        Command::Homology { complex, ring } => {
            let (k, _) = morse::load_complex(&read(complex)?).map_err(|e| anyhow!("{e}"))?;
            let summary = if ring == "z" {
                morse::simplicial_homology(&k, morse::HomologyRing::Integers)
            } else {
                let field = parse_field(ring)?;
                morse::simplicial_homology(&k, morse::HomologyRing::Field(field))
            };
            let report = Report::new();
            let extra = json!({
                "f_vector": k.f_vector(),
                "euler_characteristic": k.euler_characteristic(),
                "homology": summary.groups.iter().enumerate().map(|(dim, (betti, torsion))| json!({
                    "dimension": dim,
                    "betti": betti,
                    "torsion": torsion.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            });
            emit(cli.format, "homology", &report, extra);
            Ok(ExitCode::SUCCESS)
        }
    }
}
