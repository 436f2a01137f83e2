//! Command-line front end for `mosva`.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mosva::checker::{project_to_sym, render_sym, run_suite};
use mosva::config::{load_config, parse_config, Config};
use mosva::fields::{product_vars, vertex_series};
use mosva::halgebra::{pbw_normal_form, FreeElem, RewriteStrategy};
use mosva::parse::{parse_dual, parse_free, parse_hat_word, parse_welem};
use mosva::ratfun::{expand_in_region, LaurentPoly, RatFun, Region, Window};
use mosva::wick::{matrix_coeff_iterate, matrix_coeff_iterate_x, matrix_coeff_product};

const DEFAULT_CONFIG: &str = r#"{"dim":1,"form":[["1"]]}"#;

#[derive(Parser)]
#[command(name = "mosva", version, about = "Exact vertex operator computations over T(h_-)")]
struct Cli {
    /// JSON configuration; defaults to dim 1 with form [[1]].
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Overrides the suite seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the axiom checks selected by the configuration.
    Check,
    /// <f, Y(u_1, z_1) ... Y(u_n, z_n) w> as a rational function.
    Product(Matrix),
    /// <f, Y(Y(u_1, z_1 - z_2) u_2, z_2) w> as a rational function.
    Iterate(Matrix),
    /// Coefficients of Y(u, x) w.
    Series(Matrix),
    /// Normal form of a word in the modes a_i(n) and k.
    Normalform {
        word: String,
        /// Rewrite order: leftmost, rightmost or seeded.
        #[arg(long, default_value = "leftmost")]
        strategy: String,
    },
    /// Image of an element in the symmetric algebra.
    Quotient { elem: String },
}

#[derive(Args)]
struct Matrix {
    /// Element of T(h_-); repeat for several, outermost first.
    #[arg(short = 'u', required = true)]
    u: Vec<String>,
    /// Dual functional, as a combination of basis vectors.
    #[arg(long, default_value = "1")]
    dual: String,
    #[arg(long, default_value = "1")]
    state: String,
    /// Exponent window `lo:hi`, one per variable in order.
    #[arg(long = "window", value_parser = parse_window, allow_hyphen_values = true)]
    windows: Vec<(i64, i64)>,
}

fn parse_window(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: i64 = lo.trim().parse().map_err(|_| format!("invalid lower bound `{lo}`"))?;
    let hi: i64 = hi.trim().parse().map_err(|_| format!("invalid upper bound `{hi}`"))?;
    if lo > hi {
        return Err(format!("lower bound {lo} exceeds upper bound {hi}"));
    }
    Ok((lo, hi))
}

/// Rendered result of a command.
struct Output {
    text: String,
    json: Value,
    ok: bool,
}

impl Output {
    fn ok(text: String, json: Value) -> Self {
        Output { text, json, ok: true }
    }
}

fn load(cli: &Cli) -> mosva::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => parse_config(DEFAULT_CONFIG)?,
    };
    if let Some(s) = cli.seed {
        cfg.suite.seed = s;
    }
    Ok(cfg)
}

fn parse_us(cfg: &Config, us: &[String]) -> mosva::Result<Vec<FreeElem>> {
    us.iter().map(|u| parse_free(u, cfg.h.dim())).collect()
}

fn named_window(names: &[String], windows: &[(i64, i64)]) -> Result<Window, String> {
    if windows.len() > names.len() {
        return Err(format!(
            "{} windows given for {} variables ({})",
            windows.len(),
            names.len(),
            names.join(", ")
        ));
    }
    Ok(names.iter().cloned().zip(windows.iter().copied()).collect())
}

fn ratfun_output(r: &RatFun, expansion: Option<LaurentPoly>) -> Output {
    let mut text = r.render();
    let mut json = json!({ "result": r.to_json(), "text": r.render() });
    if let Some(p) = expansion {
        text.push_str(&format!("\nexpansion: {}", p.render()));
        json["expansion"] = p.to_json();
    }
    Output::ok(text, json)
}

fn cmd_product(cfg: &Config, a: &Matrix) -> Result<Output, String> {
    let r = cfg.module.dim();
    let us = parse_us(cfg, &a.u).map_err(|e| e.to_string())?;
    let f = parse_dual(&a.dual, cfg.h.dim(), r).map_err(|e| e.to_string())?;
    let w = parse_welem(&a.state, cfg.h.dim(), r).map_err(|e| e.to_string())?;
    let res = matrix_coeff_product(&cfg.h, &cfg.module, &us, &f, &w).map_err(|e| e.to_string())?;
    let expansion = if a.windows.is_empty() {
        None
    } else {
        let vars = product_vars(us.len());
        let win = named_window(&vars, &a.windows)?;
        Some(expand_in_region(&res, &Region::ordered(&vars), &win).map_err(|e| e.to_string())?)
    };
    Ok(ratfun_output(&res, expansion))
}

fn cmd_iterate(cfg: &Config, a: &Matrix) -> Result<Output, String> {
    let r = cfg.module.dim();
    let us = parse_us(cfg, &a.u).map_err(|e| e.to_string())?;
    let [u1, u2] = us.as_slice() else {
        return Err(format!("iterate takes exactly two -u elements, got {}", us.len()));
    };
    let f = parse_dual(&a.dual, cfg.h.dim(), r).map_err(|e| e.to_string())?;
    let w = parse_welem(&a.state, cfg.h.dim(), r).map_err(|e| e.to_string())?;
    let res = matrix_coeff_iterate(&cfg.h, &cfg.module, u1, u2, &f, &w).map_err(|e| e.to_string())?;
    let expansion = if a.windows.is_empty() {
        None
    } else {
        // windows refer to x0 = z1 - z2 and x2 = z2
        let x = matrix_coeff_iterate_x(&cfg.h, &cfg.module, u1, u2, &f, &w).map_err(|e| e.to_string())?;
        let win = named_window(&["x0".into(), "x2".into()], &a.windows)?;
        let region = Region::Iterate {
            base: "x2".into(),
            offset: "x0".into(),
        };
        Some(expand_in_region(&x, &region, &win).map_err(|e| e.to_string())?)
    };
    Ok(ratfun_output(&res, expansion))
}

fn cmd_series(cfg: &Config, a: &Matrix) -> Result<Output, String> {
    let r = cfg.module.dim();
    let us = parse_us(cfg, &a.u).map_err(|e| e.to_string())?;
    let [u] = us.as_slice() else {
        return Err(format!("series takes exactly one -u element, got {}", us.len()));
    };
    let w = parse_welem(&a.state, cfg.h.dim(), r).map_err(|e| e.to_string())?;
    let &[(lo, hi)] = a.windows.as_slice() else {
        let n = a.windows.len();
        return Err(if n == 0 {
            "series needs --window lo:hi".into()
        } else {
            format!("series takes one window, got {n}")
        });
    };
    let s = vertex_series(&cfg.h, &cfg.module, u, &w, lo, hi).map_err(|e| e.to_string())?;
    let mut lines = vec![format!("exact lower bound: x^{}", s.exact_lower_bound)];
    let mut coeffs = Vec::new();
    for (e, c) in &s.coeffs {
        if c.is_zero() {
            continue;
        }
        let t = c.render(r);
        lines.push(format!("x^{e}: {t}"));
        coeffs.push(json!({ "exponent": e, "coefficient": t }));
    }
    Ok(Output::ok(
        lines.join("\n"),
        json!({ "exact_lower_bound": s.exact_lower_bound, "coefficients": coeffs }),
    ))
}

fn cmd_normalform(cfg: &Config, word: &str, strategy: &str, seed: u64) -> Result<Output, String> {
    let strategy = match strategy {
        "leftmost" => RewriteStrategy::Leftmost,
        "rightmost" => RewriteStrategy::Rightmost,
        "seeded" => RewriteStrategy::Seeded(seed),
        other => return Err(format!("unknown strategy `{other}`")),
    };
    let w = parse_hat_word(word, cfg.h.dim()).map_err(|e| e.to_string())?;
    let t = pbw_normal_form(&w, &cfg.h, strategy).render();
    Ok(Output::ok(t.clone(), json!({ "result": t })))
}

fn cmd_quotient(cfg: &Config, elem: &str) -> Result<Output, String> {
    let u = parse_free(elem, cfg.h.dim()).map_err(|e| e.to_string())?;
    let t = render_sym(&project_to_sym(&u));
    Ok(Output::ok(t.clone(), json!({ "result": t })))
}

fn cmd_check(cfg: &Config) -> Result<Output, String> {
    let reports = run_suite(&cfg.h, &cfg.module, &cfg.suite).map_err(|e| e.to_string())?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    let mut lines: Vec<String> = reports.iter().map(|r| r.render()).collect();
    lines.push(if failed == 0 {
        format!("all {} checks passed", reports.len())
    } else {
        format!("{failed} of {} checks failed", reports.len())
    });
    Ok(Output {
        text: lines.join("\n"),
        json: json!({
            "passed": failed == 0,
            "failed": failed,
            "reports": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        }),
        ok: failed == 0,
    })
}

fn run(cli: &Cli) -> Result<Output, String> {
    let cfg = load(cli).map_err(|e| e.to_string())?;
    match &cli.command {
        Command::Check => cmd_check(&cfg),
        Command::Product(a) => cmd_product(&cfg, a),
        Command::Iterate(a) => cmd_iterate(&cfg, a),
        Command::Series(a) => cmd_series(&cfg, a),
        Command::Normalform { word, strategy } => cmd_normalform(&cfg, word, strategy, cfg.suite.seed),
        Command::Quotient { elem } => cmd_quotient(&cfg, elem),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let body = match cli.format {
                Format::Text => out.text,
                Format::Json => serde_json::to_string_pretty(&out.json).unwrap(),
            };
            // a closed pipe is not an error for the computation
            let _ = writeln!(std::io::stdout(), "{body}");
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            match cli.format {
                Format::Text => eprintln!("error: {e}"),
                Format::Json => {
                    let _ = writeln!(std::io::stdout(), "{}", json!({ "error": e }));
                }
            }
            ExitCode::from(2)
        }
    }
}
