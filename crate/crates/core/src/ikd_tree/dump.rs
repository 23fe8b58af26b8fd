use std::fmt::Write;

use super::node::Link;

/// Preorder text dump, one node per line:
/// `depth axis x y z flags treesize invalidnum minx miny minz maxx maxy maxz`.
///
/// `flags` is two characters, `D` for deleted and `T` for treedeleted, `-`
/// otherwise. Labels still waiting to be pushed down are shown as applied.
pub(crate) fn dump(root: &Link) -> String {
    let mut out = String::new();
    walk(root, 0, false, &mut out);
    out
}

fn walk(link: &Link, depth: usize, inherited: bool, out: &mut String) {
    let Some(n) = link.as_deref() else {
        return;
    };
    let tree_deleted = inherited || n.tree_deleted;
    let deleted = tree_deleted || n.deleted;
    let invalid = if inherited { n.size } else { n.invalid };
    let (lo, hi) = (n.range.min_vertex, n.range.max_vertex);
    let _ = writeln!(
        out,
        "{depth} {} {} {} {} {}{} {} {invalid} {} {} {} {} {} {}",
        n.axis,
        n.point.x,
        n.point.y,
        n.point.z,
        if deleted { 'D' } else { '-' },
        if tree_deleted { 'T' } else { '-' },
        n.size,
        lo.x,
        lo.y,
        lo.z,
        hi.x,
        hi.y,
        hi.z,
    );
    let pass = inherited || n.push_down;
    walk(&n.left, depth + 1, pass, out);
    walk(&n.right, depth + 1, pass, out);
}
