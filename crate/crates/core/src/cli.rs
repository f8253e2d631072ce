//! The `glk` command line.

use std::fmt::Write as _;
use std::fs;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::fragments::{Fragment, FragmentReport};
use crate::semantics::{check_entailment, check_equivalence, default_max_size, EntailmentVerdict};
use crate::syntax::{parse, render, substitute_relation, Formula, RelSym, Signature, Var};
use crate::transform::{
    bind, gamma_chi_bind_step, gamma_chi_cq_step, gamma_chi_fo2, guarded_negation_rewrite, singleton_encoding,
    unary_implication_rewrite, BindSpec,
};
use crate::verify::{default_signature, run_case, run_property, GenConfig, Property, PropertyRunReport};

/// Exit status and captured streams of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug, Parser)]
#[command(name = "glk", version, about = "Parse, classify, transform and model-check first-order formulas")]
struct Cli {
    /// Signature as a JSON file, or inline JSON starting with '{'.
    #[arg(long, global = true)]
    sig: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Read formulas from this file, one per non-empty line, before any positional ones.
    #[arg(long, global = true)]
    file: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and print a formula in canonical form.
    Parse { formula: Vec<String> },
    /// Report fragment membership.
    Classify {
        /// Comma-separated fragment names (default: all).
        #[arg(long, value_delimiter = ',')]
        fragments: Vec<String>,
        formula: Vec<String>,
    },
    /// Bind free variables to unary predicates.
    Bind {
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<String>,
        /// Predicates for the variables (default: fresh P0, P1, ...).
        #[arg(long, value_delimiter = ',')]
        preds: Vec<String>,
        formula: Vec<String>,
    },
    /// Substitute a formula for a relation symbol.
    Subst {
        #[arg(long)]
        rel: String,
        /// Template parameters, one per argument position.
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        /// The template formula.
        #[arg(long = "with")]
        template: String,
        formula: Vec<String>,
    },
    /// Encode free variables as singleton predicates.
    EncodeSingleton {
        /// Order of the free variables (default: sorted).
        #[arg(long, value_delimiter = ',')]
        order: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        preds: Vec<String>,
        formula: Vec<String>,
    },
    /// Build an interpolant pair.
    GammaChi {
        #[command(subcommand)]
        kind: GammaChi,
    },
    /// Apply a closure rewrite.
    Rewrite {
        #[command(subcommand)]
        kind: Rewrite,
    },
    /// Bounded check that the first formula entails the second.
    Entails {
        #[command(flatten)]
        bound: Bound,
        formula: Vec<String>,
    },
    /// Bounded check that two formulas are equivalent.
    Equiv {
        #[command(flatten)]
        bound: Bound,
        formula: Vec<String>,
    },
    /// Run a property on random instances.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct Bound {
    /// Largest domain size to check.
    #[arg(long, env = "GLK_MAX_SIZE")]
    max_size: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum GammaChi {
    /// psi & P(x) and (P'(x) & A y. P'(y) -> y = x) -> psi'.
    Fo2 {
        #[arg(long)]
        p_last: String,
        #[arg(long)]
        p_prime: Option<String>,
        #[arg(long, default_value = "x")]
        var: String,
        formula: Vec<String>,
    },
    /// E z. G(xs,z) & BIND[ys](psi) and Q(xs) -> E z. z = z & BIND[xs ys](psi).
    Bind {
        #[arg(long, value_delimiter = ',')]
        xs: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        ys: Vec<String>,
        #[arg(long)]
        z: String,
        #[arg(long, value_delimiter = ',')]
        qs: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        ps: Vec<String>,
        #[arg(long)]
        guard: Option<String>,
        formula: Vec<String>,
    },
    /// E x. G(x,ys) & psi and P(ys) -> E x. x = x & BIND[ys](psi).
    Cq {
        #[arg(long)]
        x: String,
        #[arg(long, value_delimiter = ',')]
        ys: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        ps: Vec<String>,
        #[arg(long)]
        guard: Option<String>,
        formula: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum Rewrite {
    /// alpha & !(alpha & f); takes alpha then f.
    Gn { formula: Vec<String> },
    /// (x = x & !P(x)) | f.
    Ui {
        #[arg(long)]
        pred: String,
        #[arg(long)]
        var: String,
        formula: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    prop: String,
    #[arg(long, default_value_t = 100)]
    cases: u64,
    #[command(flatten)]
    bound: Bound,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run only this case.
    #[arg(long)]
    case: Option<u64>,
    #[arg(long, default_value_t = 4)]
    max_atoms: usize,
    #[arg(long, default_value_t = 4)]
    max_vars: usize,
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
}

/// A failure that maps to an exit code.
enum Failure {
    Usage(String),
    /// A completed check that came out negative; carries the normal output.
    Negative(String),
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

struct Ctx {
    sig: Option<Signature>,
    output: Output,
    formulas: Vec<String>,
}

impl Ctx {
    fn sig(&self) -> Result<&Signature, Failure> {
        self.sig.as_ref().ok_or_else(|| usage("this command needs --sig"))
    }

    fn texts(&self, positional: Vec<String>, want: usize) -> Result<Vec<String>, Failure> {
        let all: Vec<String> = self.formulas.iter().cloned().chain(positional).collect();
        if all.len() != want {
            return Err(usage(format!("expected {want} formula(s), got {}", all.len())));
        }
        Ok(all)
    }

    fn formulas(&self, positional: Vec<String>, want: usize) -> Result<Vec<Formula>, Failure> {
        let sig = self.sig()?;
        self.texts(positional, want)?
            .iter()
            .map(|t| parse(t, sig).map_err(|e| usage(format!("{t}: {e}"))))
            .collect()
    }

    fn one(&self, positional: Vec<String>) -> Result<Formula, Failure> {
        Ok(self.formulas(positional, 1)?.remove(0))
    }

    fn emit(&self, text: String, value: serde_json::Value) -> String {
        match self.output {
            Output::Text => text + "\n",
            Output::Json => value.to_string() + "\n",
        }
    }

    fn formula_out(&self, f: &Formula) -> String {
        self.emit(render(f), json!({ "formula": render(f) }))
    }
}

fn load_signature(arg: &str) -> Result<Signature, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| usage(format!("{arg}: {e}")))?
    };
    Signature::from_json(&text).map_err(|e| usage(format!("signature: {e}")))
}

fn variables(names: &[String]) -> Result<Vec<Var>, Failure> {
    names.iter().map(|n| Var::try_new(n.as_str()).map_err(usage)).collect()
}

/// Symbols named on the command line: declared ones keep their arity,
/// others get `arity`.
fn symbols(names: &[String], sig: &Signature, arity: usize) -> Result<Vec<RelSym>, Failure> {
    names
        .iter()
        .map(|n| match sig.get(n) {
            Some(r) => Ok(r),
            None => RelSym::try_new(n.as_str(), arity).map_err(usage),
        })
        .collect()
}

fn symbols_or_fresh(
    names: &[String],
    sig: &Signature,
    prefix: &str,
    count: usize,
    avoid: &[&Formula],
) -> Result<Vec<RelSym>, Failure> {
    if names.is_empty() {
        Ok(sig.fresh_relations(prefix, count, 1, avoid))
    } else {
        symbols(names, sig, 1)
    }
}

/// The serialized name of a unit enum variant.
fn json_name(v: &impl serde::Serialize) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn verdict_out(ctx: &Ctx, v: &EntailmentVerdict) -> Result<String, Failure> {
    let mut text = format!("{} (max size {})", json_name(&v.status), v.bound);
    if let Some(w) = &v.witness {
        write!(text, "\nstructure: {}", w.structure).expect("writing to a string");
        write!(text, "\nassignment: {}", serde_json::to_string(&w.assignment).expect("serializes"))
            .expect("writing to a string");
        if let Some(d) = &w.direction {
            write!(text, "\ndirection: {}", json_name(d)).expect("writing to a string");
        }
    }
    let out = ctx.emit(text, v.to_json_value());
    if v.holds() {
        Ok(out)
    } else {
        Err(Failure::Negative(out))
    }
}

fn bound_for(bound: &Bound, formulas: &[&Formula]) -> Result<usize, Failure> {
    match bound.max_size {
        Some(0) => Err(usage("max size must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(default_max_size(formulas)),
    }
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<String, Failure> {
    match command {
        Command::Parse { formula } => {
            let f = ctx.one(formula)?;
            let free: Vec<String> = f.free_vars().iter().map(|v| v.name().to_string()).collect();
            Ok(ctx.emit(
                render(&f),
                json!({ "formula": render(&f), "free_vars": free, "sentence": f.is_sentence() }),
            ))
        }
        Command::Classify { fragments, formula } => {
            let f = ctx.one(formula)?;
            let chosen = if fragments.is_empty() {
                Fragment::ALL.to_vec()
            } else {
                fragments
                    .iter()
                    .map(|n| Fragment::from_name(n).ok_or_else(|| usage(format!("unknown fragment '{n}'"))))
                    .collect::<Result<_, _>>()?
            };
            let reports: Vec<FragmentReport> = chosen.iter().map(|fr| fr.classify(&f)).collect();
            let text = reports.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
            Ok(ctx.emit(text, json!({ "formula": render(&f), "reports": reports })))
        }
        Command::Bind { vars, preds, formula } => {
            let f = ctx.one(formula)?;
            let vs = variables(&vars)?;
            let ps = symbols_or_fresh(&preds, ctx.sig()?, "P", vs.len(), &[&f])?;
            let spec = BindSpec::new(vs, ps).map_err(usage)?;
            Ok(ctx.formula_out(&bind(&f, &spec).map_err(usage)?))
        }
        Command::Subst { rel, params, template, formula } => {
            let sig = ctx.sig()?;
            let f = ctx.one(formula)?;
            let r = sig.get(&rel).ok_or_else(|| usage(format!("'{rel}' is not in the signature")))?;
            let t = parse(&template, sig).map_err(|e| usage(format!("{template}: {e}")))?;
            let out = substitute_relation(&f, &r, &t, &variables(&params)?).map_err(usage)?;
            Ok(ctx.formula_out(&out))
        }
        Command::EncodeSingleton { order, preds, formula } => {
            let f = ctx.one(formula)?;
            let order = if order.is_empty() { f.free_vars().into_iter().collect() } else { variables(&order)? };
            let ps = symbols_or_fresh(&preds, ctx.sig()?, "P", order.len(), &[&f])?;
            Ok(ctx.formula_out(&singleton_encoding(&f, &order, &ps).map_err(usage)?))
        }
        Command::GammaChi { kind } => {
            let sig = ctx.sig()?;
            let (gamma, chi) = match kind {
                GammaChi::Fo2 { p_last, p_prime, var, formula } => {
                    let psi = ctx.one(formula)?;
                    let last = symbols(&[p_last], sig, 1)?.remove(0);
                    let prime = match p_prime {
                        Some(n) => symbols(&[n], sig, 1)?.remove(0),
                        None => sig.fresh_relation("P", 1, &[&psi]),
                    };
                    gamma_chi_fo2(&psi, &last, &prime, &Var::try_new(var).map_err(usage)?).map_err(usage)?
                }
                GammaChi::Bind { xs, ys, z, qs, ps, guard, formula } => {
                    let psi = ctx.one(formula)?;
                    let (xs, ys) = (variables(&xs)?, variables(&ys)?);
                    let qs = symbols_or_fresh(&qs, sig, "Q", xs.len(), &[&psi])?;
                    let ps = symbols_or_fresh(&ps, sig, "P", ys.len(), &[&psi])?;
                    let g = match guard {
                        Some(n) => symbols(&[n], sig, xs.len() + 1)?.remove(0),
                        None => sig.fresh_relation("G", xs.len() + 1, &[&psi]),
                    };
                    let z = Var::try_new(z).map_err(usage)?;
                    gamma_chi_bind_step(&psi, &xs, &ys, &qs, &ps, &g, &z).map_err(usage)?
                }
                GammaChi::Cq { x, ys, ps, guard, formula } => {
                    let psi = ctx.one(formula)?;
                    let ys = variables(&ys)?;
                    let ps = symbols_or_fresh(&ps, sig, "P", ys.len(), &[&psi])?;
                    let g = match guard {
                        Some(n) => symbols(&[n], sig, ys.len() + 1)?.remove(0),
                        None => sig.fresh_relation("G", ys.len() + 1, &[&psi]),
                    };
                    let x = Var::try_new(x).map_err(usage)?;
                    gamma_chi_cq_step(&psi, &x, &ys, &ps, &g).map_err(usage)?
                }
            };
            Ok(ctx.emit(
                format!("gamma: {}\nchi: {}", render(&gamma), render(&chi)),
                json!({ "gamma": render(&gamma), "chi": render(&chi) }),
            ))
        }
        Command::Rewrite { kind } => {
            let out = match kind {
                Rewrite::Gn { formula } => {
                    let fs = ctx.formulas(formula, 2)?;
                    guarded_negation_rewrite(&fs[0], &fs[1]).map_err(usage)?
                }
                Rewrite::Ui { pred, var, formula } => {
                    let f = ctx.one(formula)?;
                    let p = symbols(&[pred], ctx.sig()?, 1)?.remove(0);
                    unary_implication_rewrite(&p, &Var::try_new(var).map_err(usage)?, &f).map_err(usage)?
                }
            };
            Ok(ctx.formula_out(&out))
        }
        Command::Entails { bound, formula } => check(ctx, false, bound, formula),
        Command::Equiv { bound, formula } => check(ctx, true, bound, formula),
        Command::Verify(args) => verify(ctx, args),
    }
}

fn check(ctx: &Ctx, equivalence: bool, bound: Bound, formula: Vec<String>) -> Result<String, Failure> {
    let fs = ctx.formulas(formula, 2)?;
    let size = bound_for(&bound, &[&fs[0], &fs[1]])?;
    let sig = ctx.sig()?;
    let v = if equivalence {
        check_equivalence(&fs[0], &fs[1], sig, size)
    } else {
        check_entailment(&fs[0], &fs[1], sig, size)
    }
    .map_err(usage)?;
    verdict_out(ctx, &v)
}

fn verify(ctx: &Ctx, args: VerifyArgs) -> Result<String, Failure> {
    let prop = Property::from_name(&args.prop).ok_or_else(|| {
        let names: Vec<String> = Property::ALL.iter().map(|p| p.name().to_ascii_lowercase()).collect();
        usage(format!("unknown property '{}'; expected one of {}", args.prop, names.join(", ")))
    })?;
    let cfg = GenConfig {
        seed: args.seed,
        max_atoms: args.max_atoms,
        max_vars: args.max_vars,
        max_depth: args.max_depth,
        signature: ctx.sig.clone().unwrap_or_else(default_signature),
    };
    cfg.validate().map_err(usage)?;
    let size = match args.bound.max_size {
        Some(0) => return Err(usage("max size must be at least 1")),
        Some(n) => n,
        None => 3,
    };
    let report = match args.case {
        Some(case) => PropertyRunReport {
            property: prop,
            seed: cfg.seed,
            max_size: size,
            cases_run: 1,
            failures: run_case(prop, &cfg, size, case).into_iter().collect(),
        },
        None => {
            if args.cases == 0 {
                return Err(usage("--cases must be at least 1"));
            }
            run_property(prop, &cfg, size, args.cases)
        }
    };
    let out = ctx.emit(report.to_string(), serde_json::to_value(&report).expect("report serializes"));
    if report.passed() {
        Ok(out)
    } else {
        Err(Failure::Negative(out))
    }
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I) -> CliOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            return if code == 0 {
                CliOutcome { code: 0, stdout: rendered, stderr: String::new() }
            } else {
                CliOutcome { code: 2, stdout: String::new(), stderr: rendered }
            };
        }
    };
    let result = (|| {
        let sig = cli.sig.as_deref().map(load_signature).transpose()?;
        let formulas = match &cli.file {
            None => Vec::new(),
            Some(path) => fs::read_to_string(path)
                .map_err(|e| usage(format!("{path}: {e}")))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        };
        let ctx = Ctx { sig, output: cli.output, formulas };
        dispatch(&ctx, cli.command)
    })();
    match result {
        Ok(stdout) => CliOutcome { code: 0, stdout, stderr: String::new() },
        Err(Failure::Negative(stdout)) => CliOutcome { code: 1, stdout, stderr: String::new() },
        Err(Failure::Usage(m)) => CliOutcome { code: 2, stdout: String::new(), stderr: format!("error: {m}\n") },
    }
}
