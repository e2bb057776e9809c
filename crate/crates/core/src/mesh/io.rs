//! The `tmesh` ASCII format.
//!
//! ```text
//! tmesh 1
//! nodes <N>
//! <x> <y> <z>
//! tets <M>
//! <i> <j> <k> <l>
//! groups <G>
//! group <name> tri <T>
//! <a> <b> <c>
//! group <name> nodes <K>
//! <i>
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment running to the end
//! of the line. Indices are 0-based.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;

use super::{Group, Point, TetMesh, TriGroup};
use crate::error::{Error, Result};

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            items.extend(line.split_whitespace().map(|tok| (i + 1, tok)));
        }
        let last_line = text.lines().count().max(1);
        Tokens {
            items,
            pos: 0,
            last_line,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.items.get(self.pos) {
            Some(&item) => {
                self.pos += 1;
                Ok(item)
            }
            None => Err(Error::Parse {
                line: self.last_line,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (line, tok) = self.next(kw)?;
        if tok != kw {
            return Err(Error::Parse {
                line,
                msg: format!("expected `{kw}`, found `{tok}`"),
            });
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid {what} `{tok}`"),
        })
    }
}

pub fn parse_mesh(text: &str) -> Result<TetMesh> {
    let mut toks = Tokens::new(text);
    toks.keyword("tmesh")?;
    let (line, version) = toks.next("format version")?;
    if version != "1" {
        return Err(Error::Parse {
            line,
            msg: format!("unsupported tmesh version `{version}`"),
        });
    }

    toks.keyword("nodes")?;
    let n: usize = toks.parse("node count")?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let x = toks.parse("coordinate")?;
        let y = toks.parse("coordinate")?;
        let z = toks.parse("coordinate")?;
        vertices.push(Point::new(x, y, z));
    }

    toks.keyword("tets")?;
    let m: usize = toks.parse("tet count")?;
    let mut tets = Vec::with_capacity(m);
    for _ in 0..m {
        let mut tet = [0usize; 4];
        for v in &mut tet {
            *v = toks.parse("vertex index")?;
        }
        tets.push(tet);
    }

    toks.keyword("groups")?;
    let g: usize = toks.parse("group count")?;
    let mut groups = IndexMap::new();
    for _ in 0..g {
        toks.keyword("group")?;
        let (_, name) = toks.next("group name")?;
        let (kind_line, kind) = toks.next("group kind")?;
        let group = match kind {
            "tri" => {
                let t: usize = toks.parse("triangle count")?;
                let mut triangles = Vec::with_capacity(t);
                for _ in 0..t {
                    let mut tri = [0usize; 3];
                    for v in &mut tri {
                        *v = toks.parse("vertex index")?;
                    }
                    triangles.push(tri);
                }
                Group::Tri(TriGroup { triangles })
            }
            "nodes" => {
                let k: usize = toks.parse("node count")?;
                let mut nodes = Vec::with_capacity(k);
                for _ in 0..k {
                    nodes.push(toks.parse("vertex index")?);
                }
                Group::Nodes(nodes)
            }
            other => {
                return Err(Error::Parse {
                    line: kind_line,
                    msg: format!("unknown group kind `{other}` (expected `tri` or `nodes`)"),
                })
            }
        };
        if groups.insert(name.to_string(), group).is_some() {
            return Err(Error::DuplicateGroup(name.to_string()));
        }
    }
    if let Ok((line, tok)) = toks.next("end of file") {
        return Err(Error::Parse {
            line,
            msg: format!("trailing token `{tok}`"),
        });
    }

    TetMesh::new(vertices, tets, groups)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TetMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text)
}

/// Canonical text form: single spaces, LF endings, shortest round-trip floats.
pub fn format_mesh(mesh: &TetMesh) -> String {
    let mut out = String::new();
    out.push_str("tmesh 1\n");
    let _ = writeln!(out, "nodes {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    let _ = writeln!(out, "tets {}", mesh.tets.len());
    for t in &mesh.tets {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "groups {}", mesh.groups.len());
    for (name, group) in &mesh.groups {
        match group {
            Group::Tri(g) => {
                let _ = writeln!(out, "group {name} tri {}", g.triangles.len());
                for t in &g.triangles {
                    let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
                }
            }
            Group::Nodes(nodes) => {
                let _ = writeln!(out, "group {name} nodes {}", nodes.len());
                for i in nodes {
                    let _ = writeln!(out, "{i}");
                }
            }
        }
    }
    out
}

pub fn write_mesh(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_mesh(mesh)).map_err(|e| Error::io(path, e))
}
