use super::Formula;

const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_NOT: u8 = 4;
const PREC_ATOM: u8 = 5;

/// Renders a formula in the text syntax accepted by [`super::parse`], with the
/// minimum parentheses needed to re-parse to the same tree.
pub fn render(f: &Formula) -> String {
    let mut out = String::new();
    write(f, 0, true, &mut out);
    out
}

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..) => PREC_IMPLIES,
        Formula::Or(..) => PREC_OR,
        Formula::And(..) => PREC_AND,
        Formula::Not(..) => PREC_NOT,
        _ => PREC_ATOM,
    }
}

fn is_quantifier(f: &Formula) -> bool {
    matches!(
        f,
        Formula::Exists(..) | Formula::Forall(..) | Formula::SoExists(..) | Formula::SoForall(..)
    )
}

/// `trailing` is true when nothing follows this subformula in its enclosing
/// context, so an unparenthesized quantifier cannot swallow extra text.
fn write(f: &Formula, ctx: u8, trailing: bool, out: &mut String) {
    if prec(f) < ctx || (is_quantifier(f) && !trailing) {
        out.push('(');
        write(f, 0, true, out);
        out.push(')');
        return;
    }
    match f {
        Formula::Top => out.push_str("true"),
        Formula::Atom(r, args) => {
            out.push_str(&r.name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(a.name());
            }
            out.push(')');
        }
        Formula::Eq(a, b) => {
            out.push_str(a.name());
            out.push_str(" = ");
            out.push_str(b.name());
        }
        Formula::Not(b) => {
            out.push('!');
            write(b, PREC_NOT, trailing, out);
        }
        Formula::And(l, r) => binary(l, r, " & ", PREC_AND, trailing, out),
        Formula::Or(l, r) => binary(l, r, " | ", PREC_OR, trailing, out),
        Formula::Implies(l, r) => binary(l, r, " -> ", PREC_IMPLIES, trailing, out),
        Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
            out.push(if matches!(f, Formula::Exists(..)) { 'E' } else { 'A' });
            for v in vs {
                out.push(' ');
                out.push_str(v.name());
            }
            out.push_str(". ");
            write(b, 0, trailing, out);
        }
        Formula::SoExists(r, b) | Formula::SoForall(r, b) => {
            out.push_str(if matches!(f, Formula::SoExists(..)) { "E2 " } else { "A2 " });
            out.push_str(&r.name);
            out.push_str(". ");
            write(b, 0, trailing, out);
        }
    }
}

fn binary(l: &Formula, r: &Formula, op: &str, p: u8, trailing: bool, out: &mut String) {
    write(l, p + 1, false, out);
    out.push_str(op);
    write(r, p, trailing, out);
}
