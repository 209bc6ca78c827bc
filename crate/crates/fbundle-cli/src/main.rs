//! `fb` — command-line front end: ingest bundle descriptors, run checks and
//! constructions, emit reports and transformed bundles.
//!
//! Exit codes: 0 success, 1 mathematical failure (flatness/conditions),
//! 2 input or parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use fbundle::connection::{check_conditions, check_flatness, Bundle, ConditionMode};
use fbundle::descriptor::{
    bundle_to_descriptor, equiv_to_descriptor, from_json, to_canonical_json,
    tstructure_to_descriptor, unfold_result_from_descriptor, unfold_result_to_descriptor,
    Descriptor, Loaded,
};
use fbundle::equivariant::{equivariant_maximal_unfold, lift_t_structure};
use fbundle::error::Error;
use fbundle::framing::compute_framing;
use fbundle::instances;
use fbundle::parse::{parse_scalar, parse_series, scalar_to_string, series_to_string};
use fbundle::scalar::Scalar;
use fbundle::series::TruncOrder;
use fbundle::unfolding::{compare_unfoldings, maximal_unfold, unfold_bundle_with_f};

#[derive(Parser)]
#[command(
    name = "fb",
    version,
    about = "Exact engine for formal connection structures: framing, unfolding, equivariant lifts"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the flatness identities of a bundle descriptor.
    CheckFlat { input: PathBuf },
    /// Compute the framing trivialization; write the framed descriptor.
    Frame {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the gauge matrix grid to this path.
        #[arg(long)]
        gauge_out: Option<PathBuf>,
    },
    /// Injectivity/generation condition report for a fiber vector.
    Conditions {
        input: PathBuf,
        /// Fiber vector: `e1`, `e2`, … or a comma-separated scalar list.
        #[arg(long)]
        vector: String,
    },
    /// Build a maximal unfolding, or one prescribed by --f.
    Unfold {
        input: PathBuf,
        #[arg(long)]
        vector: String,
        /// `max` (default) or `with-f`.
        #[arg(long, default_value = "max")]
        mode: String,
        /// JSON file {"new_vars": [...], "f": ["series", ...]} for with-f.
        #[arg(long)]
        f: Option<PathBuf>,
        #[arg(long)]
        t_order: Option<u32>,
        /// u-window as `min,max`.
        #[arg(long)]
        u_order: Option<String>,
        #[arg(long)]
        lambda_cap: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blow up an R-linear (T)-structure along the equivariant parameters.
    Lift {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        lambda_cap: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two maximal unfoldings written by `unfold`.
    Compare { first: PathBuf, second: PathBuf },
    /// Build a packaged model, run its checks, write artifacts.
    Demo {
        /// One of: ex310, p1a, p1b, mirror-p1.
        name: String,
        #[arg(long, default_value_t = 4)]
        t_order: u32,
        #[arg(long, default_value = "-2,6")]
        u_order: String,
        #[arg(long, default_value_t = 2)]
        lambda_cap: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

/// 0 success, 1 mathematical failure, 2 input error.
fn classify(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::UnknownVariable(_) | Error::Invalid(_) => 2,
        _ => 1,
    }
}

fn read_descriptor(path: &Path) -> Result<Descriptor, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    from_json(&text)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn parse_vector(spec: &fbundle::ParamSpec, rank: usize, text: &str) -> Result<Vec<Scalar>, Error> {
    let syms = spec.symbols();
    if let Some(rest) = text.strip_prefix('e') {
        if let Ok(i) = rest.parse::<usize>() {
            if i >= 1 && i <= rank {
                return Ok((0..rank)
                    .map(|j| {
                        if j + 1 == i {
                            Scalar::one(syms)
                        } else {
                            Scalar::zero(syms)
                        }
                    })
                    .collect());
            }
        }
    }
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != rank {
        return Err(Error::Invalid(format!(
            "vector needs {rank} entries, got {}",
            parts.len()
        )));
    }
    parts.iter().map(|p| parse_scalar(p.trim(), spec)).collect()
}

fn parse_u_order(text: &str) -> Result<(i32, i32), Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Invalid("u-window must be `min,max`".into()));
    }
    let lo = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Invalid("bad u-window minimum".into()))?;
    let hi = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Invalid("bad u-window maximum".into()))?;
    Ok((lo, hi))
}

/// FB_NUM_THREADS is accepted as an upper bound; the exact kernels run
/// single-threaded, so reports record both numbers.
fn thread_note() -> Value {
    let requested = std::env::var("FB_NUM_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    json!({ "requested": requested, "used": 1 })
}

fn loaded_bundle(d: &Descriptor) -> Result<Bundle, Error> {
    match d.load()? {
        Loaded::T(t) => Ok(Bundle::T(t)),
        Loaded::F(f) => Ok(Bundle::F(f)),
        Loaded::Equiv(e) => Ok(Bundle::F(e.k_bundle)),
    }
}

fn run() -> Result<(), (u8, String)> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::CheckFlat { input } => {
            let d = read_descriptor(&input).map_err(|e| (classify(&e), e.to_string()))?;
            let loaded = d.load().map_err(|e| (2, e.to_string()))?;
            let report = match &loaded {
                Loaded::T(t) => check_flatness(&Bundle::T(t.clone())),
                Loaded::F(f) => check_flatness(&Bundle::F(f.clone())),
                Loaded::Equiv(e) => {
                    let k = check_flatness(&Bundle::F(e.k_bundle.clone()))
                        .map_err(|er| (1, er.to_string()))?;
                    if !k.flat {
                        println!("{}", serde_json::to_string_pretty(&k.to_json()).unwrap());
                        return Err((1, "k-level bundle is not flat".into()));
                    }
                    check_flatness(&Bundle::T(e.r_tstruct.clone()))
                }
            }
            .map_err(|e| (1, e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&report.to_json()).unwrap());
            if report.flat {
                Ok(())
            } else {
                Err((1, "flatness residual is nonzero".into()))
            }
        }
        Cmd::Frame {
            input,
            out,
            gauge_out,
        } => {
            let d = read_descriptor(&input).map_err(|e| (classify(&e), e.to_string()))?;
            let b = loaded_bundle(&d).map_err(|e| (classify(&e), e.to_string()))?;
            let (gauge, framed) =
                compute_framing(b.tstructure()).map_err(|e| (classify(&e), e.to_string()))?;
            let framed_desc = tstructure_to_descriptor(&framed);
            let text = to_canonical_json(&framed_desc);
            match out {
                Some(p) => write_text(&p, &text).map_err(|e| (2, e.to_string()))?,
                None => print!("{text}"),
            }
            if let Some(p) = gauge_out {
                let n = framed.rank();
                let grid: Vec<Vec<String>> = (0..n)
                    .map(|i| (0..n).map(|j| series_to_string(&gauge.p[(i, j)])).collect())
                    .collect();
                let v = json!({ "gauge": grid, "threads": thread_note() });
                write_text(&p, &serde_json::to_string_pretty(&v).unwrap())
                    .map_err(|e| (2, e.to_string()))?;
            }
            Ok(())
        }
        Cmd::Conditions { input, vector } => {
            let d = read_descriptor(&input).map_err(|e| (classify(&e), e.to_string()))?;
            let loaded = d.load().map_err(|e| (2, e.to_string()))?;
            let (b, mode) = match loaded {
                Loaded::T(t) => (Bundle::T(t), ConditionMode::TStructure),
                Loaded::F(f) => (Bundle::F(f), ConditionMode::FBundle),
                Loaded::Equiv(e) => (Bundle::T(e.r_tstruct), ConditionMode::TStructure),
            };
            let v = parse_vector(&b.tstructure().spec, b.rank(), &vector)
                .map_err(|e| (2, e.to_string()))?;
            let rep = check_conditions(&b, &v, mode).map_err(|e| (1, e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&rep.to_json()).unwrap());
            Ok(())
        }
        Cmd::Unfold {
            input,
            vector,
            mode,
            f,
            t_order,
            u_order,
            lambda_cap,
            out,
        } => {
            let mut d = read_descriptor(&input).map_err(|e| (classify(&e), e.to_string()))?;
            if let Some(tc) = t_order {
                d.order.t_cap = tc;
            }
            if let Some(u) = &u_order {
                let (lo, hi) = parse_u_order(u).map_err(|e| (2, e.to_string()))?;
                d.order.u_min = lo;
                d.order.u_max = hi;
            }
            if let Some(cap) = lambda_cap {
                if d.r_structure.is_some() {
                    d.lambda_cap = Some(cap);
                }
            }
            let loaded = d.load().map_err(|e| (2, e.to_string()))?;
            match loaded {
                Loaded::Equiv(e) => {
                    let v = parse_vector(&e.r_tstruct.spec, e.r_tstruct.rank(), &vector)
                        .map_err(|er| (2, er.to_string()))?;
                    let res = equivariant_maximal_unfold(&e, &v)
                        .map_err(|er| (classify(&er), er.to_string()))?;
                    let out_desc = equiv_to_descriptor(&res.bundle);
                    write_text(&out, &to_canonical_json(&out_desc))
                        .map_err(|er| (2, er.to_string()))?;
                    write_certificate(&out, &res.r_unfold)?;
                    println!(
                        "unfolded: added {:?}, certificate determinant {}",
                        res.r_unfold.added_vars,
                        scalar_to_string(&res.r_unfold.certificate.det)
                    );
                    Ok(())
                }
                other => {
                    let b = match other {
                        Loaded::T(t) => Bundle::T(t),
                        Loaded::F(f) => Bundle::F(f),
                        Loaded::Equiv(_) => unreachable!(),
                    };
                    let spec = b.tstructure().spec.clone();
                    let v = parse_vector(&spec, b.rank(), &vector)
                        .map_err(|er| (2, er.to_string()))?;
                    let res = match mode.as_str() {
                        "max" => {
                            maximal_unfold(&b, &v).map_err(|er| (classify(&er), er.to_string()))?
                        }
                        "with-f" => {
                            let fp = f.ok_or((2, "--f is required for with-f".to_string()))?;
                            let ftext =
                                std::fs::read_to_string(&fp).map_err(|e| (2, e.to_string()))?;
                            let fdoc: Value =
                                serde_json::from_str(&ftext).map_err(|e| (2, e.to_string()))?;
                            let new_vars: Vec<String> = fdoc["new_vars"]
                                .as_array()
                                .ok_or((2, "f file needs new_vars".to_string()))?
                                .iter()
                                .map(|s| s.as_str().unwrap_or_default().to_string())
                                .collect();
                            let big_vars = b.tstructure().vars().extend(&new_vars);
                            let order = b.tstructure().order();
                            let fs: Result<Vec<_>, _> = fdoc["f"]
                                .as_array()
                                .ok_or((2, "f file needs f".to_string()))?
                                .iter()
                                .map(|s| {
                                    parse_series(
                                        s.as_str().unwrap_or_default(),
                                        &spec,
                                        &big_vars,
                                        order,
                                    )
                                })
                                .collect();
                            let fs = fs.map_err(|e| (2, e.to_string()))?;
                            let unfolded = unfold_bundle_with_f(&b, &new_vars, &fs)
                                .map_err(|er| (classify(&er), er.to_string()))?;
                            let good_basis =
                                fbundle::ScalarMatrix::identity(spec.symbols(), b.rank());
                            fbundle::unfolding::promote_unfolding(
                                &unfolded, &b, new_vars, &good_basis, fs, &v,
                            )
                            .map_err(|er| (classify(&er), er.to_string()))?
                        }
                        other => return Err((2, format!("unknown mode `{other}`"))),
                    };
                    let out_desc = unfold_result_to_descriptor(&res, &b);
                    write_text(&out, &to_canonical_json(&out_desc))
                        .map_err(|er| (2, er.to_string()))?;
                    write_certificate(&out, &res)?;
                    println!(
                        "unfolded: added {:?}, certificate determinant {}",
                        res.added_vars,
                        scalar_to_string(&res.certificate.det)
                    );
                    Ok(())
                }
            }
        }
        Cmd::Lift {
            input,
            lambda_cap,
            out,
        } => {
            let d = read_descriptor(&input).map_err(|e| (classify(&e), e.to_string()))?;
            let Loaded::T(t) = d.load().map_err(|e| (2, e.to_string()))? else {
                return Err((2, "lift expects a plain (T)-structure descriptor".into()));
            };
            let lifted =
                lift_t_structure(&t, lambda_cap).map_err(|e| (classify(&e), e.to_string()))?;
            let mut desc = tstructure_to_descriptor(&lifted);
            desc.lambda_cap = Some(lambda_cap);
            write_text(&out, &to_canonical_json(&desc)).map_err(|e| (2, e.to_string()))?;
            Ok(())
        }
        Cmd::Compare { first, second } => {
            let d1 = read_descriptor(&first).map_err(|e| (classify(&e), e.to_string()))?;
            let d2 = read_descriptor(&second).map_err(|e| (classify(&e), e.to_string()))?;
            let u1 =
                unfold_result_from_descriptor(&d1).map_err(|e| (classify(&e), e.to_string()))?;
            let u2 =
                unfold_result_from_descriptor(&d2).map_err(|e| (classify(&e), e.to_string()))?;
            let iso = compare_unfoldings(&u1, &u2).map_err(|e| (1, e.to_string()))?;
            let base: Vec<String> = iso.base_map.iter().map(series_to_string).collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "isomorphic": true,
                    "direction": iso.direction,
                    "base_map": base,
                }))
                .unwrap()
            );
            Ok(())
        }
        Cmd::Demo {
            name,
            t_order,
            u_order,
            lambda_cap,
            out,
        } => {
            let (lo, hi) = parse_u_order(&u_order).map_err(|e| (2, e.to_string()))?;
            let order = TruncOrder::new(t_order, lo, hi);
            run_demo(&name, order, lambda_cap, &out)
        }
    }
}

fn write_certificate(
    out: &Path,
    res: &fbundle::unfolding::UnfoldResult,
) -> Result<(), (u8, String)> {
    let cert_path = out.with_extension("cert.json");
    let m = &res.certificate.matrix;
    let grid: Vec<Vec<String>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| scalar_to_string(&m[(i, j)])).collect())
        .collect();
    let v = json!({
        "added_vars": res.added_vars,
        "evaluation_matrix": grid,
        "determinant": scalar_to_string(&res.certificate.det),
        "maximal": res.certificate.maximal,
        "needed_localizations": res.conditions.needed_localizations.iter()
            .map(scalar_to_string).collect::<Vec<_>>(),
        "threads": thread_note(),
    });
    write_text(&cert_path, &serde_json::to_string_pretty(&v).unwrap())
        .map_err(|e| (2, e.to_string()))
}

fn run_demo(
    name: &str,
    order: TruncOrder,
    lambda_cap: u32,
    out: &Path,
) -> Result<(), (u8, String)> {
    std::fs::create_dir_all(out).map_err(|e| (2, e.to_string()))?;
    let math = |e: Error| (classify(&e), e.to_string());
    match name {
        "ex310" => {
            let f = instances::make_ex310(order, &["l1"]).map_err(math)?;
            let syms = f.t.spec.symbols().clone();
            write_text(
                &out.join("ex310.json"),
                &to_canonical_json(&bundle_to_descriptor(&Bundle::F(f.clone()))),
            )
            .map_err(|e| (2, e.to_string()))?;
            let (_spec, m) = instances::symbolic_evaluation_matrix().map_err(math)?;
            let det = m.det().map_err(math)?;
            write_text(
                &out.join("determinant.txt"),
                &(scalar_to_string(&det) + "\n"),
            )
            .map_err(|e| (2, e.to_string()))?;
            for (label, idx) in [("e3", 2usize), ("e2", 1), ("e1", 0)] {
                let v: Vec<Scalar> = (0..3)
                    .map(|j| {
                        if j == idx {
                            Scalar::one(&syms)
                        } else {
                            Scalar::zero(&syms)
                        }
                    })
                    .collect();
                let rep = check_conditions(&Bundle::F(f.clone()), &v, ConditionMode::FBundle)
                    .map_err(math)?;
                write_text(
                    &out.join(format!("conditions_{label}.json")),
                    &serde_json::to_string_pretty(&rep.to_json()).unwrap(),
                )
                .map_err(|e| (2, e.to_string()))?;
            }
            let v = vec![
                Scalar::zero(&syms),
                Scalar::zero(&syms),
                Scalar::one(&syms),
            ];
            let res = maximal_unfold(&Bundle::F(f.clone()), &v).map_err(math)?;
            write_text(
                &out.join("unfold_e3.json"),
                &to_canonical_json(&unfold_result_to_descriptor(&res, &Bundle::F(f.clone()))),
            )
            .map_err(|e| (2, e.to_string()))?;
            write_certificate(&out.join("unfold_e3.json"), &res)?;
            let flat = check_flatness(&res.bundle).map_err(math)?;
            if !flat.flat {
                return Err((1, "unfolded bundle failed the flatness check".into()));
            }
            println!(
                "ex310: determinant, conditions and maximal unfolding written to {}",
                out.display()
            );
            Ok(())
        }
        "p1a" => {
            let m = instances::p1_a_model(order.t_cap, lambda_cap, order.u_max).map_err(math)?;
            write_text(
                &out.join("p1a_small.json"),
                &to_canonical_json(&equiv_to_descriptor(&m.equiv)),
            )
            .map_err(|e| (2, e.to_string()))?;
            write_text(
                &out.join("p1a_big_closed_form.json"),
                &to_canonical_json(&tstructure_to_descriptor(&m.big_closed_form)),
            )
            .map_err(|e| (2, e.to_string()))?;
            let syms = m.qh.spec.symbols().clone();
            let v = vec![Scalar::one(&syms), Scalar::zero(&syms)];
            let res = equivariant_maximal_unfold(&m.equiv, &v).map_err(math)?;
            write_text(
                &out.join("p1a_unfolded.json"),
                &to_canonical_json(&equiv_to_descriptor(&res.bundle)),
            )
            .map_err(|e| (2, e.to_string()))?;
            let mut grading_ok = true;
            if let Some(g) = &m.equiv.k_grading {
                for j in 0..m.equiv.k_bundle.t.n_vars() {
                    grading_ok &= g
                        .residual(&m.equiv.k_bundle.t, j)
                        .map_err(math)?
                        .is_zero();
                }
            }
            let report = json!({
                "k_flat": check_flatness(&Bundle::F(m.equiv.k_bundle.clone())).map_err(math)?.flat,
                "grading_compatible": grading_ok,
                "unfold_added": res.r_unfold.added_vars,
                "certificate_det": scalar_to_string(&res.r_unfold.certificate.det),
                "threads": thread_note(),
            });
            write_text(
                &out.join("report.json"),
                &serde_json::to_string_pretty(&report).unwrap(),
            )
            .map_err(|e| (2, e.to_string()))?;
            if !grading_ok {
                return Err((1, "grading compatibility failed".into()));
            }
            println!(
                "p1a: small/big models, unfolding and report written to {}",
                out.display()
            );
            Ok(())
        }
        "p1b" => {
            let m = instances::p1_b_model(order.t_cap, lambda_cap, order.u_max).map_err(math)?;
            let big = instances::unfolded_p1_b_model(order.t_cap, lambda_cap, order.u_max)
                .map_err(math)?;
            write_text(
                &out.join("p1b_small.json"),
                &to_canonical_json(&equiv_to_descriptor(&m.equiv)),
            )
            .map_err(|e| (2, e.to_string()))?;
            write_text(
                &out.join("p1b_unfolded.json"),
                &to_canonical_json(&equiv_to_descriptor(&big.equiv)),
            )
            .map_err(|e| (2, e.to_string()))?;
            let mut table = String::new();
            for mm in -1i64..=5 {
                let (a, b) = m.brieskorn.reduce_z_power(mm).map_err(math)?;
                table.push_str(&format!(
                    "[z^{mm} w] = ({}) [w] + ({}) [z w]\n",
                    series_to_string(&a),
                    series_to_string(&b)
                ));
            }
            write_text(&out.join("reduction_table.txt"), &table)
                .map_err(|e| (2, e.to_string()))?;
            let syms = m.qh.spec.symbols().clone();
            let v = vec![Scalar::one(&syms), Scalar::zero(&syms)];
            let max =
                fbundle::connection::check_maximal(&Bundle::T(big.equiv.r_tstruct.clone()), &v)
                    .map_err(math)?;
            let report = json!({
                "k_flat": check_flatness(&Bundle::F(m.equiv.k_bundle.clone())).map_err(math)?.flat,
                "unfolded_maximal": max.maximal,
                "certificate_det": scalar_to_string(&max.certificate),
                "threads": thread_note(),
            });
            write_text(
                &out.join("report.json"),
                &serde_json::to_string_pretty(&report).unwrap(),
            )
            .map_err(|e| (2, e.to_string()))?;
            if !max.maximal {
                return Err((1, "unfolded superpotential model is not maximal".into()));
            }
            println!(
                "p1b: models, reduction table and report written to {}",
                out.display()
            );
            Ok(())
        }
        "mirror-p1" => {
            let rep = instances::verify_small_mirror_p1(order.t_cap, lambda_cap, order.u_max, None)
                .map_err(math)?;
            write_text(
                &out.join("mirror_report.json"),
                &serde_json::to_string_pretty(&rep.to_json()).unwrap(),
            )
            .map_err(|e| (2, e.to_string()))?;
            match &rep.witness {
                Some(w) => {
                    println!(
                        "mirror-p1: intertwiner found (sign {}, shift {}), report written to {}",
                        w.sign,
                        w.shift,
                        out.display()
                    );
                    if rep.noneq_u_direction_ok {
                        Ok(())
                    } else {
                        Err((1, "non-equivariant u-direction check failed".into()))
                    }
                }
                None => Err((
                    1,
                    rep.obstruction
                        .unwrap_or_else(|| "no intertwiner found".into()),
                )),
            }
        }
        other => Err((2, format!("unknown demo `{other}` (ex310|p1a|p1b|mirror-p1)"))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
