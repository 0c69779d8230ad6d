//! Text serialization of matching problems.
//!
//! The grammar is documented in `docs/problem-format.md`. Floats are written
//! with Rust's shortest round-trip representation, so `load ∘ save` is exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::affinity::LayerAffinities;
use crate::error::{Error, Result};
use crate::model::EdgeIncidence;
use crate::problem::MatchingProblem;

pub const FORMAT_NAME: &str = "MLGM";
pub const FORMAT_VERSION: &str = "1";

fn write_edges(out: &mut String, name: &str, e: &EdgeIncidence) {
    writeln!(out, "{name} {}", e.n_edges()).unwrap();
    for (s, t) in e.pairs() {
        writeln!(out, "{s} {t}").unwrap();
    }
}

fn write_block(out: &mut String, name: &str, index: usize, m: &DMatrix<f64>) {
    writeln!(out, "{name} {index} {} {}", m.nrows(), m.ncols()).unwrap();
    if m.ncols() == 0 {
        return;
    }
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", cells.join(" ")).unwrap();
    }
}

/// Serializes a problem to the text format.
pub fn problem_to_string(p: &MatchingProblem) -> String {
    let mut out = format!("{FORMAT_NAME} {FORMAT_VERSION}\n");
    writeln!(out, "layers {}", p.n_layers).unwrap();
    writeln!(out, "vertices {} {}", p.n1(), p.n2()).unwrap();
    write_edges(&mut out, "edges1", &p.intra1);
    write_edges(&mut out, "edges2", &p.intra2);
    write_edges(&mut out, "inter1", &p.inter1);
    write_edges(&mut out, "inter2", &p.inter2);
    for (k, m) in p.affinities.unary.iter().enumerate() {
        write_block(&mut out, "unary", k, m);
    }
    for (k, m) in p.affinities.intra.iter().enumerate() {
        write_block(&mut out, "intra", k, m);
    }
    for (k, m) in p.affinities.inter.iter().enumerate() {
        write_block(&mut out, "inter", k, m);
    }
    if let Some(gt) = &p.ground_truth {
        let cells: Vec<String> = gt
            .iter()
            .map(|a| a.map_or_else(|| "-".to_string(), |a| a.to_string()))
            .collect();
        writeln!(out, "truth {}", cells.join(" ")).unwrap();
    }
    out.push_str("end\n");
    out
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |(n, _)| *n)
    }

    fn next(&mut self, expecting: &str) -> Result<(usize, &'a str)> {
        let line = self.lines.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: self.last_line(),
            msg: format!("unexpected end of file, missing section '{expecting}'"),
        })?;
        self.pos += 1;
        Ok(line)
    }

    fn peek_keyword(&self) -> Option<&'a str> {
        self.lines.get(self.pos).and_then(|(_, l)| l.split_whitespace().next())
    }

    /// A header line `keyword arg…`, returning the arguments; `label` names
    /// the section in errors.
    fn header(&mut self, keyword: &str, label: &str, n_args: usize) -> Result<(usize, Vec<usize>)> {
        let (line, text) = self.next(label)?;
        let mut tokens = text.split_whitespace();
        let found = tokens.next().unwrap_or("");
        if found != keyword {
            return Err(Error::Parse {
                line,
                msg: format!("expected section '{label}', found '{found}'"),
            });
        }
        let args = tokens
            .map(|t| parse_count(t, line, keyword))
            .collect::<Result<Vec<_>>>()?;
        if args.len() != n_args {
            return Err(Error::Parse {
                line,
                msg: format!("'{keyword}' takes {n_args} numbers, found {}", args.len()),
            });
        }
        Ok((line, args))
    }
}

fn parse_count(token: &str, line: usize, field: &str) -> Result<usize> {
    token.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{field}: expected a non-negative integer, found '{token}'"),
    })
}

fn parse_float(token: &str, line: usize, field: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{field}: expected a number, found '{token}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("{field}: non-finite value '{token}'"),
        });
    }
    Ok(v)
}

fn read_edges(r: &mut Reader<'_>, name: &str, n_vertices: usize) -> Result<EdgeIncidence> {
    let (_, args) = r.header(name, name, 1)?;
    let mut pairs = Vec::with_capacity(args[0]);
    for _ in 0..args[0] {
        let (line, text) = r.next(name)?;
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("{name}: an edge is two vertex indices"),
            });
        }
        let (s, e) = (parse_count(t[0], line, name)?, parse_count(t[1], line, name)?);
        if s >= n_vertices || e >= n_vertices {
            return Err(Error::Parse {
                line,
                msg: format!("{name}: vertex index out of range 0..{n_vertices}"),
            });
        }
        pairs.push((s, e));
    }
    EdgeIncidence::from_pairs(n_vertices, &pairs)
}

fn read_block(r: &mut Reader<'_>, name: &str, index: usize, shape: (usize, usize)) -> Result<DMatrix<f64>> {
    let section = format!("{name} {index}");
    let (line, args) = r.header(name, &section, 3)?;
    if args[0] != index {
        return Err(Error::Parse {
            line,
            msg: format!("expected section '{section}', found '{name} {}'", args[0]),
        });
    }
    if (args[1], args[2]) != shape {
        return Err(Error::Parse {
            line,
            msg: format!(
                "{section}: shape {}×{} does not match the edge lists ({}×{})",
                args[1], args[2], shape.0, shape.1
            ),
        });
    }
    let mut m = DMatrix::zeros(shape.0, shape.1);
    // empty rows are not written
    let rows = if shape.1 == 0 { 0 } else { shape.0 };
    for i in 0..rows {
        let (line, text) = r.next(&section)?;
        let cells: Vec<&str> = text.split_whitespace().collect();
        if cells.len() != shape.1 {
            return Err(Error::Parse {
                line,
                msg: format!("{section}: row {i} has {} values, expected {}", cells.len(), shape.1),
            });
        }
        for (j, c) in cells.iter().enumerate() {
            m[(i, j)] = parse_float(c, line, &section)?;
        }
    }
    Ok(m)
}

/// Parses the text format.
pub fn problem_from_str(text: &str) -> Result<MatchingProblem> {
    let mut r = Reader::new(text);
    let (line, head) = r.next(FORMAT_NAME)?;
    let mut tokens = head.split_whitespace();
    if tokens.next() != Some(FORMAT_NAME) {
        return Err(Error::Parse {
            line,
            msg: format!("missing '{FORMAT_NAME}' header"),
        });
    }
    match tokens.next() {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::Version(v.to_string())),
        None => return Err(Error::Version(String::new())),
    }

    let (line, layers) = r.header("layers", "layers", 1)?;
    let n_layers = layers[0];
    if n_layers == 0 {
        return Err(Error::Parse {
            line,
            msg: "at least one layer is required".into(),
        });
    }
    let (_, v) = r.header("vertices", "vertices", 2)?;
    let (n1, n2) = (v[0], v[1]);
    let intra1 = read_edges(&mut r, "edges1", n1)?;
    let intra2 = read_edges(&mut r, "edges2", n2)?;
    let inter1 = read_edges(&mut r, "inter1", n1)?;
    let inter2 = read_edges(&mut r, "inter2", n2)?;

    let (m1, m2) = (intra1.n_edges(), intra2.n_edges());
    let (k1, k2) = (inter1.n_edges(), inter2.n_edges());
    let unary = (0..n_layers)
        .map(|k| read_block(&mut r, "unary", k, (n1, n2)))
        .collect::<Result<Vec<_>>>()?;
    let intra = (0..n_layers)
        .map(|k| read_block(&mut r, "intra", k, (m1, m2)))
        .collect::<Result<Vec<_>>>()?;
    let inter = (0..n_layers * (n_layers - 1))
        .map(|k| read_block(&mut r, "inter", k, (k1, k2)))
        .collect::<Result<Vec<_>>>()?;

    let mut ground_truth = None;
    if r.peek_keyword() == Some("truth") {
        let (line, text) = r.next("truth")?;
        let cells: Vec<&str> = text.split_whitespace().skip(1).collect();
        if cells.len() != n1 {
            return Err(Error::Parse {
                line,
                msg: format!("truth: {} entries for {n1} vertices", cells.len()),
            });
        }
        let gt = cells
            .iter()
            .map(|c| {
                if *c == "-" {
                    Ok(None)
                } else {
                    parse_count(c, line, "truth").map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        ground_truth = Some(gt);
    }
    let (line, text) = r.next("end")?;
    if text != "end" {
        return Err(Error::Parse {
            line,
            msg: format!("expected section 'end', found '{text}'"),
        });
    }
    if let Some(&(line, _)) = r.lines.get(r.pos) {
        return Err(Error::Parse {
            line,
            msg: "content after 'end'".into(),
        });
    }
    MatchingProblem::new(
        intra1,
        intra2,
        inter1,
        inter2,
        LayerAffinities { unary, intra, inter },
        ground_truth,
    )
}

pub fn save_problem(path: impl AsRef<Path>, problem: &MatchingProblem) -> Result<()> {
    std::fs::write(path, problem_to_string(problem))?;
    Ok(())
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<MatchingProblem> {
    problem_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{random_problem, RandomProblemSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> MatchingProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = random_problem(
            &RandomProblemSpec {
                unary: true,
                ..RandomProblemSpec::square(3, 2)
            },
            &mut rng,
        );
        p.ground_truth = Some(vec![Some(2), None, Some(0)]);
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let text = problem_to_string(&p);
        assert!(text.starts_with("MLGM 1\n"));
        assert_eq!(problem_from_str(&text).unwrap(), p);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = problem_to_string(&sample()).replace("layers", "# header done\n\nlayers");
        assert_eq!(problem_from_str(&text).unwrap(), sample());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = problem_to_string(&sample()).replacen("MLGM 1", "MLGM 2", 1);
        assert!(matches!(problem_from_str(&text), Err(Error::Version(v)) if v == "2"));
    }

    #[test]
    fn truncation_names_the_missing_section() {
        let text = problem_to_string(&sample());
        let cut: String = text
            .lines()
            .take_while(|l| !l.starts_with("intra 1"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = problem_from_str(&cut).unwrap_err().to_string();
        assert!(err.contains("intra 1"), "{err}");
        assert!(err.contains("end of file"), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = problem_to_string(&sample());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let row = lines.iter().position(|l| l.starts_with("unary 0")).unwrap() + 1;
        lines[row] = lines[row].replacen(|c: char| c.is_ascii_digit(), "x", 1);
        match problem_from_str(&lines.join("\n")) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, row + 1);
                assert!(msg.contains("unary 0"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }
}
