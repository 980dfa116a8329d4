//! MovieLens-1M `::`-separated files and the canonical CSV layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Gender, ItemRecord, RatingDataset, RatingRecord, RatingScale, UserRecord};
use crate::error::{Error, Result};

pub const ML1M_RATINGS: &str = "ratings.dat";
pub const ML1M_USERS: &str = "users.dat";
pub const ML1M_MOVIES: &str = "movies.dat";

const USERS_CSV: &str = "users.csv";
const ITEMS_CSV: &str = "items.csv";
const RATINGS_CSV: &str = "ratings.csv";

/// Reads a file as text. MovieLens-1M ships Latin-1 titles, so bytes that are
/// not valid UTF-8 are decoded as ISO-8859-1.
fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().iter().map(|&b| b as char).collect(),
    })
}

struct Lines<'a> {
    path: &'a Path,
    text: &'a str,
}

impl<'a> Lines<'a> {
    /// Non-blank lines split on `::`, with 1-based line numbers.
    fn records(&self) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
        self.text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| (n + 1, l.trim_end_matches('\r').split("::").collect()))
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn field<T: std::str::FromStr>(&self, line: usize, name: &str, raw: &str) -> Result<T> {
        raw.trim()
            .parse()
            .map_err(|_| self.error(line, format!("invalid {name} `{raw}`")))
    }
}

fn parse_users(path: &Path) -> Result<Vec<UserRecord>> {
    let text = read_text(path)?;
    let lines = Lines { path, text: &text };
    lines
        .records()
        .map(|(n, f)| {
            if f.len() != 5 {
                return Err(lines.error(n, format!("expected 5 fields, found {}", f.len())));
            }
            let gender = match f[1].trim() {
                "M" => Gender::Male,
                "F" => Gender::Female,
                other => return Err(lines.error(n, format!("invalid gender `{other}`"))),
            };
            Ok(UserRecord {
                id: lines.field(n, "user id", f[0])?,
                gender,
            })
        })
        .collect()
}

fn parse_movies(path: &Path) -> Result<Vec<ItemRecord>> {
    let text = read_text(path)?;
    let lines = Lines { path, text: &text };
    lines
        .records()
        .map(|(n, f)| {
            if f.len() < 3 {
                return Err(lines.error(n, format!("expected 3 fields, found {}", f.len())));
            }
            let genres: Vec<String> = f[f.len() - 1]
                .split('|')
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(str::to_owned)
                .collect();
            if genres.is_empty() {
                return Err(lines.error(n, "movie has no genres"));
            }
            Ok(ItemRecord {
                id: lines.field(n, "movie id", f[0])?,
                title: f[1..f.len() - 1].join("::"),
                genres,
            })
        })
        .collect()
}

fn parse_ratings(path: &Path, scale: &RatingScale) -> Result<Vec<RatingRecord>> {
    let text = read_text(path)?;
    let lines = Lines { path, text: &text };
    lines
        .records()
        .map(|(n, f)| {
            if f.len() != 4 {
                return Err(lines.error(n, format!("expected 4 fields, found {}", f.len())));
            }
            let value: u8 = lines.field(n, "rating", f[2])?;
            if !scale.contains(value) {
                return Err(lines.error(n, format!("rating {value} outside the rating scale")));
            }
            Ok(RatingRecord {
                user: lines.field(n, "user id", f[0])?,
                item: lines.field(n, "movie id", f[1])?,
                value,
                timestamp: lines.field(n, "timestamp", f[3])?,
            })
        })
        .collect()
}

/// Loads the three MovieLens-1M files into a validated dataset on the
/// 1..=5 star scale.
pub fn load_dataset(ratings_file: &Path, users_file: &Path, movies_file: &Path) -> Result<RatingDataset> {
    let scale = RatingScale::five_star();
    let users = parse_users(users_file)?;
    let items = parse_movies(movies_file)?;
    let ratings = parse_ratings(ratings_file, &scale)?;
    RatingDataset::new(users, items, ratings, scale)
}

#[derive(Serialize, Deserialize)]
struct UserRow {
    user_id: u32,
    gender: Gender,
}

#[derive(Serialize, Deserialize)]
struct ItemRow {
    item_id: u32,
    title: String,
    genres: String,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::csv(path, e))).collect()
}

/// Writes `users.csv`, `items.csv` and `ratings.csv` (UTF-8, LF, header row)
/// into `dir`. Returns the written paths.
pub fn write_canonical(ds: &RatingDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = [USERS_CSV, ITEMS_CSV, RATINGS_CSV].map(|f| dir.join(f));
    write_rows(
        &paths[0],
        ds.users().iter().map(|u| UserRow {
            user_id: u.id,
            gender: u.gender,
        }),
    )?;
    write_rows(
        &paths[1],
        ds.items().iter().map(|i| ItemRow {
            item_id: i.id,
            title: i.title.clone(),
            genres: i.genres.join("|"),
        }),
    )?;
    write_rows(&paths[2], ds.ratings().iter().map(|r| CanonicalRating::from(*r)))?;
    Ok(paths.to_vec())
}

#[derive(Serialize, Deserialize)]
struct CanonicalRating {
    user_id: u32,
    item_id: u32,
    rating: u8,
    timestamp: i64,
}

impl From<RatingRecord> for CanonicalRating {
    fn from(r: RatingRecord) -> Self {
        Self {
            user_id: r.user,
            item_id: r.item,
            rating: r.value,
            timestamp: r.timestamp,
        }
    }
}

/// Reads a directory written by [`write_canonical`].
pub fn read_canonical(dir: &Path, scale: RatingScale) -> Result<RatingDataset> {
    let users = read_rows::<UserRow>(&dir.join(USERS_CSV))?
        .into_iter()
        .map(|u| UserRecord {
            id: u.user_id,
            gender: u.gender,
        })
        .collect();
    let items = read_rows::<ItemRow>(&dir.join(ITEMS_CSV))?
        .into_iter()
        .map(|i| ItemRecord {
            id: i.item_id,
            title: i.title,
            genres: i.genres.split('|').filter(|g| !g.is_empty()).map(str::to_owned).collect(),
        })
        .collect();
    let ratings = read_rows::<CanonicalRating>(&dir.join(RATINGS_CSV))?
        .into_iter()
        .map(|r| RatingRecord {
            user: r.user_id,
            item: r.item_id,
            value: r.rating,
            timestamp: r.timestamp,
        })
        .collect();
    RatingDataset::new(users, items, ratings, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    const USERS: &str = "1::F::1::10::48067\n2::M::56::16::70072\n3::M::25::15::55117\n";
    const MOVIES: &str = "1::Toy Story (1995)::Animation|Children's|Comedy\n\
                          2::Jumanji (1995)::Adventure|Children's|Fantasy\n\
                          3::Grumpier Old Men (1995)::Comedy|Romance\n";
    const RATINGS: &str = "1::1::5::978300760\n1::3::3::978302109\n2::2::4::978298413\n3::1::1::978220179\n";

    fn write_fixture(dir: &Path, ratings: &str, users: &str, movies: &str) -> [PathBuf; 3] {
        let paths = [ML1M_RATINGS, ML1M_USERS, ML1M_MOVIES].map(|f| dir.join(f));
        fs::write(&paths[0], ratings).unwrap();
        fs::write(&paths[1], users).unwrap();
        fs::write(&paths[2], movies).unwrap();
        paths
    }

    #[test]
    fn fixture_records_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let [r, u, m] = write_fixture(dir.path(), RATINGS, USERS, MOVIES);
        let ds = load_dataset(&r, &u, &m).unwrap();
        assert_eq!(
            ds.users(),
            &[
                UserRecord { id: 1, gender: Gender::Female },
                UserRecord { id: 2, gender: Gender::Male },
                UserRecord { id: 3, gender: Gender::Male },
            ]
        );
        assert_eq!(ds.items()[2].title, "Grumpier Old Men (1995)");
        assert_eq!(ds.items()[0].genres, vec!["Animation", "Children's", "Comedy"]);
        let expected = [(1, 1, 5, 978300760), (1, 3, 3, 978302109), (2, 2, 4, 978298413), (3, 1, 1, 978220179)];
        let got: Vec<_> = ds.ratings().iter().map(|r| (r.user, r.item, r.value, r.timestamp)).collect();
        assert_eq!(got, expected);
        assert_eq!(ds.ratings_by_gender(Gender::Male), 2);
        assert_eq!(ds.ratings_by_gender(Gender::Female), 2);
    }

    #[test]
    fn empty_ratings_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let [r, u, m] = write_fixture(dir.path(), "", USERS, MOVIES);
        let ds = load_dataset(&r, &u, &m).unwrap();
        assert_eq!(ds.num_ratings(), 0);
        assert_eq!(ds.users().len(), 3);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let [r, u, m] = write_fixture(dir.path(), "1::1::5::1\n1::2::x::2\n", USERS, MOVIES);
        match load_dataset(&r, &u, &m) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let [r, u, m] = write_fixture(dir.path(), "1::1::5\n", USERS, MOVIES);
        assert!(matches!(load_dataset(&r, &u, &m), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn reference_and_domain_errors() {
        let dir = tempfile::tempdir().unwrap();
        let [r, u, m] = write_fixture(dir.path(), "9::1::5::1\n", USERS, MOVIES);
        assert!(matches!(load_dataset(&r, &u, &m), Err(Error::UnknownUser(9))));
        let [r, u, m] = write_fixture(dir.path(), "1::9::5::1\n", USERS, MOVIES);
        assert!(matches!(load_dataset(&r, &u, &m), Err(Error::UnknownItem(9))));
        let [r, u, m] = write_fixture(dir.path(), "1::1::5::1\n1::1::4::2\n", USERS, MOVIES);
        assert!(matches!(load_dataset(&r, &u, &m), Err(Error::DuplicateRating { .. })));
        let [r, u, m] = write_fixture(dir.path(), "1::1::0::1\n", USERS, MOVIES);
        assert!(matches!(load_dataset(&r, &u, &m), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn latin1_titles_are_decoded() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_fixture(dir.path(), RATINGS, USERS, MOVIES);
        let mut movies = MOVIES.as_bytes().to_vec();
        movies.extend_from_slice(b"4::Caf\xe9 (1999)::Drama\n");
        fs::write(&paths[2], movies).unwrap();
        let ds = load_dataset(&paths[0], &paths[1], &paths[2]).unwrap();
        assert_eq!(ds.item(4).unwrap().title, "Café (1999)");
    }

    #[test]
    fn canonical_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let [r, u, m] = write_fixture(dir.path(), RATINGS, USERS, MOVIES);
        let ds = load_dataset(&r, &u, &m).unwrap();
        let out = dir.path().join("canonical");
        write_canonical(&ds, &out).unwrap();
        let text = fs::read_to_string(out.join("ratings.csv")).unwrap();
        assert!(text.starts_with("user_id,item_id,rating,timestamp\n"));
        assert!(!text.contains('\r'));
        let back = read_canonical(&out, RatingScale::five_star()).unwrap();
        assert_eq!(back, ds);
    }
}
