import numpy as np
import pytest

from mcme import io


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_linear_csv_with_header_and_comments(tmp_path):
    p = write(tmp_path, "d.csv", "a1,a2,b\n# note\n1,2,3\n\n4,5,6\n")
    A, b = io.read_linear_csv(p)
    assert A.tolist() == [[1, 2], [4, 5]] and b.tolist() == [3, 6]


@pytest.mark.parametrize("text, line", [
    ("1,2,3\n4,x,6\n", 2),
    ("a,b\n1,2\n3,4,5\n", 3),
    ("1,2\n3,inf\n", 2),
    ("", 1),
])
def test_linear_csv_errors_name_the_line(tmp_path, text, line):
    p = write(tmp_path, "bad.csv", text)
    with pytest.raises(io.ParseError) as exc:
        io.read_linear_csv(p)
    assert exc.value.line == line
    assert f"bad.csv:{line}:" in str(exc.value)


def test_correspondences_and_pairs(tmp_path):
    x, xp = io.read_correspondences_csv(write(tmp_path, "c.csv", "x,y,x2,y2\n1,2,3,4\n"))
    assert x.tolist() == [[1, 2]] and xp.tolist() == [[3, 4]]
    with pytest.raises(io.ParseError):
        io.read_correspondences_csv(write(tmp_path, "c2.csv", "1,2,3\n"))
    a, b = io.read_pairs_csv(write(tmp_path, "p.csv", "1,2,3,4,5,6\n"))
    assert a.tolist() == [[1, 2, 3]] and b.tolist() == [[4, 5, 6]]


def test_xyz(tmp_path):
    pts = io.read_xyz(write(tmp_path, "c.xyz", "0 0 0\n1 2 3 255\n"))
    assert pts.tolist() == [[0, 0, 0], [1, 2, 3]]
    with pytest.raises(io.ParseError) as exc:
        io.read_xyz(write(tmp_path, "bad.xyz", "0 0 0\n1 2\n"))
    assert exc.value.line == 2


PLY = """ply
format ascii 1.0
comment made by hand
element vertex 3
property float x
property float y
property float z
property uchar red
element face 1
property list uchar int vertex_indices
end_header
0 0 0 255
1 0 0 255
0 1 0.5 255
3 0 1 2
"""


def test_ply_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(20, 3))
    body = "".join(" ".join("%.17g" % v for v in p) + "\n" for p in pts)
    hdr = "ply\nformat ascii 1.0\nelement vertex 20\nproperty double x\nproperty double y\n" \
          "property double z\nend_header\n"
    got = io.read_cloud(write(tmp_path, "r.ply", hdr + body))
    assert np.array_equal(got, pts)


def test_ply_with_extra_properties(tmp_path):
    pts = io.read_ply(write(tmp_path, "m.ply", PLY))
    assert pts.tolist() == [[0, 0, 0], [1, 0, 0], [0, 1, 0.5]]


@pytest.mark.parametrize("mutate, line", [
    (lambda s: s.replace("ply\n", "plx\n", 1), 1),
    (lambda s: s.replace("ascii", "binary_little_endian"), 2),
    (lambda s: s.replace("vertex 3", "vertex three"), 4),
    (lambda s: s.replace("1 0 0 255", "1 zero 0 255"), 13),
    (lambda s: s.replace("0 1 0.5 255\n3 0 1 2\n", ""), 14),
    (lambda s: s.replace("end_header\n", ""), 11),
])
def test_ply_errors_name_the_line(tmp_path, mutate, line):
    p = write(tmp_path, "bad.ply", mutate(PLY))
    with pytest.raises(io.ParseError) as exc:
        io.read_ply(p)
    assert exc.value.line == line
