use super::{
    validate_case, BranchRecord, BusRecord, BusType, CaseError, GenRecord, RawCase, Status,
};

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 13;

struct Matrix {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

/// Parses arbitrary bytes; invalid UTF-8 is replaced before parsing.
pub fn parse_matpower_bytes(bytes: &[u8]) -> Result<RawCase, CaseError> {
    parse_matpower(&String::from_utf8_lossy(bytes))
}

/// Parses the MATPOWER function-file subset: `mpc.baseMVA`, `mpc.bus`,
/// `mpc.gen` and `mpc.branch`. Other `mpc.*` assignments are skipped.
pub fn parse_matpower(text: &str) -> Result<RawCase, CaseError> {
    let stripped = strip_comments(text);
    let mut scan = Scanner::new(&stripped);

    let mut base_mva = None;
    let mut bus = None;
    let mut gen = None;
    let mut branch = None;

    loop {
        scan.skip_separators();
        if scan.at_end() {
            break;
        }
        let line = scan.line;
        let ident = scan.identifier();
        if ident.is_empty() {
            return Err(syntax(line, format!("unexpected character {:?}", scan.peek().unwrap_or(' '))));
        }
        if ident == "function" {
            scan.skip_line();
            continue;
        }
        scan.skip_blanks();
        if scan.peek() != Some('=') {
            return Err(syntax(line, format!("expected `=` after `{ident}`")));
        }
        scan.bump();
        scan.skip_blanks();
        match ident.as_str() {
            "mpc.baseMVA" => {
                let tok = scan.scalar_token();
                let value = parse_number(&tok).ok_or_else(|| syntax(line, format!("bad baseMVA value {tok:?}")))?;
                base_mva = Some(value);
            }
            "mpc.bus" => bus = Some(scan.matrix()?),
            "mpc.gen" => gen = Some(scan.matrix()?),
            "mpc.branch" => branch = Some(scan.matrix()?),
            _ => scan.skip_value()?,
        }
    }

    let base_mva = base_mva.ok_or(CaseError::MissingSection("baseMVA"))?;
    let bus = bus.ok_or(CaseError::MissingSection("bus"))?;
    let gen = gen.ok_or(CaseError::MissingSection("gen"))?;
    let branch = branch.ok_or(CaseError::MissingSection("branch"))?;

    let case = RawCase {
        base_mva,
        buses: convert_buses(&bus, base_mva)?,
        gens: convert_gens(&gen, base_mva)?,
        branches: convert_branches(&branch)?,
    };
    let diags = validate_case(&case);
    if diags.is_empty() {
        Ok(case)
    } else {
        Err(CaseError::Validation(diags))
    }
}

fn syntax(line: usize, message: impl Into<String>) -> CaseError {
    CaseError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    let v: f64 = tok.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut in_quote = false;
        for c in line.chars() {
            match c {
                '\'' => in_quote = !in_quote,
                '%' | '#' if !in_quote => break,
                _ => {}
            }
            out.push(c);
        }
        out.push('\n');
    }
    out
}

struct Scanner<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner {
            chars: text.chars().peekable(),
            line: 1,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn skip_blanks(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t' || c == '\r') {
            self.bump();
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace() || c == ';' || c == ',') {
            self.bump();
        }
    }

    fn skip_line(&mut self) {
        while let Some(c) = self.bump() {
            if c == '\n' {
                break;
            }
        }
    }

    fn identifier(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn scalar_token(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c == ';' || c == '\n' {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn skip_value(&mut self) -> Result<(), CaseError> {
        let line = self.line;
        match self.peek() {
            Some('[') => self.skip_delimited('[', ']', line),
            Some('{') => self.skip_delimited('{', '}', line),
            Some('\'') => {
                self.bump();
                while let Some(c) = self.bump() {
                    if c == '\'' {
                        return Ok(());
                    }
                }
                Err(syntax(line, "unterminated string"))
            }
            _ => {
                self.scalar_token();
                Ok(())
            }
        }
    }

    fn skip_delimited(&mut self, open: char, close: char, line: usize) -> Result<(), CaseError> {
        let mut depth = 0usize;
        let mut in_quote = false;
        while let Some(c) = self.bump() {
            if c == '\'' {
                in_quote = !in_quote;
            } else if !in_quote && c == open {
                depth += 1;
            } else if !in_quote && c == close {
                depth -= 1;
                if depth == 0 {
                    return Ok(());
                }
            }
        }
        Err(syntax(line, format!("unterminated `{open}`")))
    }

    fn matrix(&mut self) -> Result<Matrix, CaseError> {
        let start = self.line;
        if self.bump() != Some('[') {
            return Err(syntax(start, "expected `[` to open a matrix"));
        }
        let mut rows = Vec::new();
        let mut row: Vec<f64> = Vec::new();
        let mut row_line = self.line;
        let mut token = String::new();

        let flush_token = |token: &mut String, row: &mut Vec<f64>, line: usize| -> Result<(), CaseError> {
            if token.is_empty() {
                return Ok(());
            }
            let v = parse_number(token).ok_or_else(|| syntax(line, format!("not a numeric literal: {token:?}")))?;
            row.push(v);
            token.clear();
            Ok(())
        };

        loop {
            let Some(c) = self.peek() else {
                return Err(syntax(start, "unterminated matrix"));
            };
            match c {
                ']' => {
                    flush_token(&mut token, &mut row, self.line)?;
                    self.bump();
                    if !row.is_empty() {
                        rows.push((row_line, std::mem::take(&mut row)));
                    }
                    return Ok(Matrix { line: start, rows });
                }
                ';' | '\n' => {
                    flush_token(&mut token, &mut row, self.line)?;
                    if !row.is_empty() {
                        rows.push((row_line, std::mem::take(&mut row)));
                    }
                    self.bump();
                    row_line = self.line;
                }
                c if c.is_whitespace() || c == ',' => {
                    flush_token(&mut token, &mut row, self.line)?;
                    self.bump();
                }
                c if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+') => {
                    if row.is_empty() && token.is_empty() {
                        row_line = self.line;
                    }
                    token.push(c);
                    self.bump();
                }
                other => return Err(syntax(self.line, format!("unexpected character {other:?} in matrix"))),
            }
        }
    }
}

fn check_width(m: &Matrix, section: &str, min: usize) -> Result<(), CaseError> {
    if m.rows.is_empty() {
        return Err(syntax(m.line, format!("`{section}` matrix is empty")));
    }
    for (line, row) in &m.rows {
        if row.len() < min {
            return Err(syntax(*line, format!("`{section}` row has {} columns, need at least {min}", row.len())));
        }
    }
    Ok(())
}

fn as_id(v: f64, line: usize, what: &str) -> Result<usize, CaseError> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(syntax(line, format!("{what} must be a positive integer, got {v}")))
    }
}

fn as_status(v: f64) -> Status {
    if v > 0.0 {
        Status::On
    } else {
        Status::Off
    }
}

fn convert_buses(m: &Matrix, base: f64) -> Result<Vec<BusRecord>, CaseError> {
    check_width(m, "bus", BUS_COLS)?;
    m.rows
        .iter()
        .map(|(line, r)| {
            let bus_type = match r[1] {
                1.0 => BusType::Pq,
                2.0 => BusType::Pv,
                3.0 => BusType::Ref,
                t => return Err(syntax(*line, format!("unsupported bus type {t}"))),
            };
            Ok(BusRecord {
                id: as_id(r[0], *line, "bus id")?,
                bus_type,
                p_load: r[2] / base,
                q_load: r[3] / base,
                gs: r[4] / base,
                bs: r[5] / base,
                v_init: r[7],
                theta_init: r[8].to_radians(),
            })
        })
        .collect()
}

fn convert_gens(m: &Matrix, base: f64) -> Result<Vec<GenRecord>, CaseError> {
    check_width(m, "gen", GEN_COLS)?;
    m.rows
        .iter()
        .map(|(line, r)| {
            Ok(GenRecord {
                bus: as_id(r[0], *line, "gen bus")?,
                p_gen: r[1] / base,
                q_gen: r[2] / base,
                v_set: r[5],
                status: as_status(r[7]),
            })
        })
        .collect()
}

fn convert_branches(m: &Matrix) -> Result<Vec<BranchRecord>, CaseError> {
    check_width(m, "branch", BRANCH_COLS)?;
    m.rows
        .iter()
        .map(|(line, r)| {
            Ok(BranchRecord {
                from: as_id(r[0], *line, "branch from-bus")?,
                to: as_id(r[1], *line, "branch to-bus")?,
                r: r[2],
                x: r[3],
                b_charge: r[4],
                tap: r[8],
                shift: r[9].to_radians(),
                status: as_status(r[10]),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "function mpc = two
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0   0 0 0 1 1 0 230 1 1.1 0.9;
    2 1 100 20 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
    1 0 0 300 -300 1 100 1 250 10;
];
mpc.branch = [
    1 2 0 0.1 0 0 0 0 0 0 1 -360 360;
];
";

    #[test]
    fn two_bus_per_unit() {
        let case = parse_matpower(TWO_BUS).unwrap();
        assert_eq!(case.buses.len(), 2);
        assert_eq!(case.buses[1].p_load, 1.0);
        assert_eq!(case.buses[1].q_load, 0.2);
        assert_eq!(case.branches[0].ratio(), 1.0);
    }

    #[test]
    fn missing_branch_section() {
        let text = TWO_BUS.split("mpc.branch").next().unwrap();
        assert!(matches!(parse_matpower(text), Err(CaseError::MissingSection("branch"))));
    }

    #[test]
    fn comments_and_unknown_sections_are_skipped() {
        let text = format!(
            "{TWO_BUS}\n%% cost\nmpc.gencost = [\n 2 0 0 3 0.1 5 0; % trailing\n];\nmpc.bus_name = {{\n 'a;b'; 'c' }};\nmpc.version = '2';\n"
        );
        assert!(parse_matpower(&text).is_ok());
    }

    #[test]
    fn short_rows_are_rejected() {
        let text = TWO_BUS.replace("1 2 0 0.1 0 0 0 0 0 0 1 -360 360;", "1 2 0 0.1;");
        match parse_matpower(&text) {
            Err(CaseError::Syntax { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expressions_are_syntax_errors() {
        let text = TWO_BUS.replace("100 20", "50*2 20");
        assert!(matches!(parse_matpower(&text), Err(CaseError::Syntax { .. })));
    }

    #[test]
    fn degrees_become_radians() {
        let text = TWO_BUS.replace("2 1 100 20 0 0 1 1 0", "2 1 100 20 0 0 1 1 -30");
        let case = parse_matpower(&text).unwrap();
        assert!((case.buses[1].theta_init + std::f64::consts::PI / 6.0).abs() < 1e-15);
    }
}
