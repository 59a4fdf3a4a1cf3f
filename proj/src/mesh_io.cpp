#include "choir/mesh_io.hpp"
#include "choir/binary.hpp"
#include "choir/error.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace choir {

namespace {

std::ifstream openIn(std::string const &path, std::ios::openmode mode = std::ios::in)
{
  std::ifstream in(path, mode);
  if (!in) { fail(ErrorCode::Io, "cannot open " + path); }
  return in;
}

std::ofstream openOut(std::string const &path, std::ios::openmode mode = std::ios::out)
{
  std::ofstream out(path, mode);
  if (!out) { fail(ErrorCode::Io, "cannot write " + path); }
  return out;
}

struct ObjRecords
{
  std::vector<Vec3d> v, vn;
  std::vector<std::array<int, 3>> f;
};

ObjRecords parseObj(std::istream &in)
{
  ObjRecords rec;
  std::string line;
  size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') { continue; }
    if (tag == "v" || tag == "vn") {
      Vec3d p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        fail(ErrorCode::Malformed, "bad vertex record on line " + std::to_string(lineNo));
      }
      (tag == "v" ? rec.v : rec.vn).push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        int const i = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(i > 0 ? i - 1 : static_cast<int>(rec.v.size()) + i);
      }
      if (idx.size() < 3) { fail(ErrorCode::Malformed, "face with fewer than 3 vertices on line " + std::to_string(lineNo)); }
      for (size_t k = 1; k + 1 < idx.size(); ++k) { rec.f.push_back({idx[0], idx[k], idx[k + 1]}); }
    }
  }
  return rec;
}

Points toPoints(std::vector<Vec3d> const &v)
{
  Points p(static_cast<Index>(v.size()), 3);
  for (size_t i = 0; i < v.size(); ++i) { p.row(static_cast<Index>(i)) = v[i].transpose(); }
  return p;
}

} // namespace

TriangleMesh readObj(std::istream &in)
{
  ObjRecords rec = parseObj(in);
  TriangleMesh mesh;
  mesh.vertices = toPoints(rec.v);
  mesh.faces.resize(static_cast<Index>(rec.f.size()), 3);
  for (size_t i = 0; i < rec.f.size(); ++i) {
    mesh.faces.row(static_cast<Index>(i)) << rec.f[i][0], rec.f[i][1], rec.f[i][2];
  }
  mesh.validate();
  return mesh;
}

TriangleMesh readObj(std::string const &path)
{
  auto in = openIn(path);
  return readObj(in);
}

void writeObj(std::ostream &out, TriangleMesh const &mesh)
{
  out << std::setprecision(17);
  for (Index i = 0; i < mesh.numVertices(); ++i) {
    out << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  }
  for (Index f = 0; f < mesh.numFaces(); ++f) {
    out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' ' << mesh.faces(f, 2) + 1 << '\n';
  }
}

void writeObj(std::string const &path, TriangleMesh const &mesh)
{
  auto out = openOut(path);
  writeObj(out, mesh);
}

PointCloud readObjPoints(std::string const &path)
{
  auto in = openIn(path);
  ObjRecords rec = parseObj(in);
  PointCloud cloud(toPoints(rec.v));
  if (rec.vn.size() == rec.v.size()) {
    cloud.normals = toPoints(rec.vn);
    cloud.normals.rowwise().normalize();
  }
  return cloud;
}

std::vector<std::uint8_t> encodePointCloud(PointCloud const &cloud)
{
  binary::Writer w;
  w.magic("PCLD");
  w.put(static_cast<std::uint32_t>(cloud.size()));
  for (Index i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) { w.f32(cloud.points(i, c)); }
  }
  return w.take();
}

PointCloud decodePointCloud(std::vector<std::uint8_t> const &bytes)
{
  binary::Reader r(bytes);
  r.expectMagic("PCLD");
  auto const n = r.get<std::uint32_t>();
  r.need(size_t{n} * 12);
  PointCloud cloud;
  cloud.points.resize(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) { cloud.points(i, c) = r.f32(); }
  }
  return cloud;
}

void writePointCloud(std::string const &path, PointCloud const &cloud) { writeBytes(path, encodePointCloud(cloud)); }
PointCloud readPointCloud(std::string const &path) { return decodePointCloud(readBytes(path)); }

std::vector<std::uint8_t> readBytes(std::string const &path)
{
  auto in = openIn(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void writeBytes(std::string const &path, std::vector<std::uint8_t> const &bytes)
{
  auto out = openOut(path, std::ios::binary);
  out.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) { fail(ErrorCode::Io, "write failed for " + path); }
}

} // namespace choir
