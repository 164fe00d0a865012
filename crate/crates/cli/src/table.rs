//! Minimal RFC-4180 CSV emission: CRLF records, quoting only where the
//! cell content requires it. Column order is part of the CLI contract,
//! so every subcommand states its headers explicitly.

/// In-memory table with a fixed header row.
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics when the cell count does not match the header; that is a
    /// programming error, not an input error.
    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(
            cells.len(),
            self.headers.len(),
            "row width must match header"
        );
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        push_record(&mut out, &self.headers);
        for row in &self.rows {
            push_record(&mut out, row);
        }
        out
    }
}

fn push_record(out: &mut String, cells: &[String]) {
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&quoted(cell));
    }
    out.push_str("\r\n");
}

fn quoted(cell: &str) -> String {
    if cell.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Shortest decimal form that parses back to the same f64.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Empty cell for absent values.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotes_only_when_needed() {
        let mut t = Table::new(&["a", "b"]);
        t.row(vec!["plain".into(), "with, comma".into()]);
        t.row(vec!["say \"hi\"".into(), "line\nbreak".into()]);
        let csv = t.to_csv();
        assert_eq!(
            csv,
            "a,b\r\nplain,\"with, comma\"\r\n\"say \"\"hi\"\"\",\"line\nbreak\"\r\n"
        );
    }

    #[test]
    fn numbers_round_trip() {
        let v = 1.4999999999999998e-29;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
        assert_eq!(opt(None), "");
    }
}
