//! Server-rendered public pages.

use std::fmt::Write;

use reviewboard_core::model::{BoardMeta, Dimension, PublicRecord};
use reviewboard_core::query::SearchPage;
use reviewboard_core::record_format::escape_html as esc;

use crate::RosterEntry;

fn dimension_meaning(dim: &Dimension) -> &'static str {
    match dim.as_str() {
        "presentation" => "How clearly the paper is written and organised.",
        "relevance" => "How relevant the paper is to the readers of this board.",
        "soundness" => "Whether the methods and arguments support the conclusions.",
        "originality" => "How new the ideas or results are.",
        "importance-questions" => "How important the questions addressed are.",
        "importance-results" => "How important the results are.",
        _ => "A board-specific criterion; see the help pages.",
    }
}

fn page(board: &BoardMeta, title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{title} - {board}</title>\n</head>\n<body>\n\
         <nav><a href=\"/\">Home</a> | <a href=\"/records\">Records</a> | <a href=\"/search\">Search</a> | \
         <a href=\"/board\">Board</a> | <a href=\"/criteria\">Criteria</a> | <a href=\"/help\">Help</a></nav>\n\
         {body}</body>\n</html>\n",
        title = esc(title),
        board = esc(&board.title),
    )
}

pub fn title_page(board: &BoardMeta, released: usize) -> String {
    let mut body = format!("<h1>{}</h1>\n", esc(&board.title));
    let _ = writeln!(
        body,
        "<p>This board collects graded reviews of papers published elsewhere. \
         {released} reviewed papers are currently public.</p>"
    );
    body.push_str(
        "<ul>\n<li><a href=\"/records\">Index of reviewed papers</a></li>\n\
         <li><a href=\"/search\">Search by content and grades</a></li>\n\
         <li><a href=\"/board\">Reviewers and supporting institutions</a></li>\n\
         <li><a href=\"/criteria\">What the grades mean</a></li>\n\
         <li><a href=\"/help\">Help</a></li>\n\
         <li><a href=\"/export.redif\">All records as ReDIF</a></li>\n</ul>\n",
    );
    let _ = writeln!(
        body,
        "<p>Maintainer: <a href=\"mailto:{0}\">{0}</a></p>",
        esc(&board.maintainer_email)
    );
    page(board, "Home", &body)
}

pub fn board_page(board: &BoardMeta, roster: &[RosterEntry]) -> String {
    let mut body = format!("<h1>{}</h1>\n<h2>Reviewers</h2>\n", esc(&board.title));
    if roster.is_empty() {
        body.push_str("<p>The reviewer list has not been published.</p>\n");
    } else {
        body.push_str("<table>\n<tr><th>Name</th><th>Institution</th></tr>\n");
        for entry in roster {
            let _ = writeln!(
                body,
                "<tr><td>{}</td><td>{}</td></tr>",
                esc(&entry.name),
                esc(&entry.institution)
            );
        }
        body.push_str("</table>\n");
    }
    let mut institutions: Vec<&str> = roster
        .iter()
        .map(|e| e.institution.as_str())
        .filter(|i| !i.is_empty())
        .collect();
    institutions.sort_unstable();
    institutions.dedup();
    if !institutions.is_empty() {
        body.push_str("<h2>Supporting institutions</h2>\n<ul>\n");
        for i in institutions {
            let _ = writeln!(body, "<li>{}</li>", esc(i));
        }
        body.push_str("</ul>\n");
    }
    if !board.classification_codes.is_empty() {
        let _ = writeln!(
            body,
            "<p>Classification: {}</p>",
            esc(&board.classification_codes.join(", "))
        );
    }
    page(board, "Board", &body)
}

pub fn criteria_page(board: &BoardMeta) -> String {
    let mut body = String::from(
        "<h1>What the grades mean</h1>\n\
         <p>Each reviewer grades a paper from 1 (poor) to 5 (excellent) on every dimension below. \
         The public record shows the mean grade per dimension, rounded to one decimal place \
         (halves round up), together with the number of reviewers and their comments, unattributed.</p>\n<dl>\n",
    );
    for dim in &board.dimensions {
        let _ = writeln!(
            body,
            "<dt>{0} (<code>avg-{0}</code>)</dt><dd>{1}</dd>",
            esc(dim.as_str()),
            dimension_meaning(dim)
        );
    }
    let _ = write!(
        body,
        "</dl>\n<h2>Review process</h2>\n\
         <p>Only accredited reviewers may submit reviews. A paper becomes ready for release once \
         {} distinct reviewers have graded it; an editor then checks the reviews and releases the record. \
         Later reviews are held back until the editor releases the record again.</p>\n\
         <p>Searches compare against the rounded averages shown on each record, so \
         <code>presentation &gt; 2</code> excludes a record showing 2.0 and includes one showing 2.1.</p>\n",
        board.min_reviews
    );
    page(board, "Criteria", &body)
}

pub fn default_help(board: &BoardMeta) -> String {
    let body = "<h1>Help</h1>\n<h2>Search syntax</h2>\n<pre>\n\
         presentation &gt; 2                   average grade above 2\n\
         originality&gt;=4 keyword:context      both conditions\n\
         title:agents OR author:edmonds       either condition\n\
         NOT (soundness&lt;3 OR reviewers&lt;2)   negation and grouping\n\
         abstract:\"bounded rationality\"       phrase inside one field\n\
         </pre>\n\
         <p>Fields: author, title, keyword, abstract, comment, any. A bare word searches every field. \
         Comparisons take a dimension name or <code>reviewers</code> and one of &lt; &lt;= = &gt;= &gt;.</p>\n";
    page(board, "Help", body)
}

pub fn help_index(board: &BoardMeta, files: &[String]) -> String {
    let mut body = String::from("<h1>Help</h1>\n<ul>\n");
    for f in files {
        let _ = writeln!(body, "<li><a href=\"/help/{0}\">{0}</a></li>", esc(f));
    }
    body.push_str("</ul>\n");
    page(board, "Help", &body)
}

fn averages_summary(record: &PublicRecord) -> String {
    record
        .aggregates
        .averages
        .iter()
        .map(|(d, a)| format!("{} {a}", d.as_str()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn record_item(record: &PublicRecord) -> String {
    format!(
        "<li><a href=\"/records/{id}\">{title}</a> by {authors} ({n} reviewers; {avgs})</li>\n",
        id = record.record_id(),
        title = esc(&record.paper.title),
        authors = esc(&record.paper.authors.join("; ")),
        n = record.aggregates.reviewer_count,
        avgs = esc(&averages_summary(record)),
    )
}

pub fn records_index(board: &BoardMeta, records: &[&PublicRecord]) -> String {
    let mut body = format!("<h1>Reviewed papers</h1>\n<p>{} records.</p>\n<ul>\n", records.len());
    for r in records {
        body.push_str(&record_item(r));
    }
    body.push_str("</ul>\n");
    page(board, "Records", &body)
}

pub fn search_page(board: &BoardMeta, query: &str, page_data: &SearchPage, offset: usize) -> String {
    let mut body = format!(
        "<h1>Search</h1>\n<form action=\"/search\" method=\"get\">\
         <input name=\"q\" size=\"60\" value=\"{}\"> <button>Search</button></form>\n",
        esc(query)
    );
    for w in &page_data.warnings {
        let _ = writeln!(body, "<p class=\"warning\">{}</p>", esc(&w.to_string()));
    }
    let _ = writeln!(
        body,
        "<p>{} matches; showing {} from {}.</p>\n<ol class=\"results\">",
        page_data.total,
        page_data.results.len(),
        offset + usize::from(!page_data.results.is_empty())
    );
    for r in &page_data.results {
        body.push_str(&record_item(&r.record));
    }
    body.push_str("</ol>\n");
    page(board, "Search", &body)
}
