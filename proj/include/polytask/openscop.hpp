#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "polytask/ast.hpp"
#include "polytask/error.hpp"
#include "polytask/parser.hpp"
#include "polytask/scop.hpp"

namespace polytask {

// Textual OpenScop dialect. Relations are integer matrices with the usual
// column layout [e/i | output dims | input dims | local dims | parameters | 1];
// statement bodies and iterator names travel in <body> extensions, array names
// in a global <arrays> extension. Output is deterministic and newline is '\n',
// so write(read(write(s))) is byte-identical.

namespace openscop_detail {

struct RelationMatrix {
  int rows = 0, cols = 0;
  int outputDims = 0, inputDims = 0, localDims = 0, parameters = 0;
  std::vector<std::vector<BigInt>> data;  // includes the leading e/i column
};

inline void write_relation(std::ostream& os, const std::string& kind, const RelationMatrix& m) {
  os << kind << "\n";
  os << m.rows << " " << m.cols << " " << m.outputDims << " " << m.inputDims << " "
     << m.localDims << " " << m.parameters << "\n";
  for (const auto& row : m.data) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::string cell = row[i].str();
      os << std::string(cell.size() >= 4 ? 1 : 4 - cell.size(), ' ') << cell;
    }
    os << "\n";
  }
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  // Next significant line (comments and blanks skipped), trimmed.
  std::string next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineNo_;
      std::size_t start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos) continue;
      std::size_t hash = line.find('#');
      std::string body = line.substr(0, hash == std::string::npos ? line.size() : hash);
      std::size_t b = body.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      std::size_t e = body.find_last_not_of(" \t\r");
      return body.substr(b, e - b + 1);
    }
    throw FormatError("unexpected end of file", lineNo_);
  }

  // Next non-comment line kept verbatim after trimming; statement bodies may
  // legally contain '#'-free text only, so a leading '#' still means comment.
  std::string next_raw() {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineNo_;
      std::size_t b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      if (line[b] == '#') continue;
      std::size_t e = line.find_last_not_of(" \t\r");
      return line.substr(b, e - b + 1);
    }
    throw FormatError("unexpected end of file", lineNo_);
  }

  int line() const { return lineNo_; }

 private:
  std::istringstream in_;
  int lineNo_ = 0;
};

inline long expect_long(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError("expected an integer, found '" + text + "'", line);
  }
}

inline std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream ss(line);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

inline RelationMatrix read_relation(LineReader& reader, const std::string& expectKind) {
  std::string kind = reader.next();
  if (kind != expectKind)
    throw FormatError("expected relation '" + expectKind + "', found '" + kind + "'",
                      reader.line());
  std::vector<std::string> header = split_words(reader.next());
  if (header.size() != 6) throw FormatError("relation header needs 6 fields", reader.line());
  RelationMatrix m;
  m.rows = static_cast<int>(expect_long(header[0], reader.line()));
  m.cols = static_cast<int>(expect_long(header[1], reader.line()));
  m.outputDims = static_cast<int>(expect_long(header[2], reader.line()));
  m.inputDims = static_cast<int>(expect_long(header[3], reader.line()));
  m.localDims = static_cast<int>(expect_long(header[4], reader.line()));
  m.parameters = static_cast<int>(expect_long(header[5], reader.line()));
  if (m.cols != 1 + m.outputDims + m.inputDims + m.localDims + m.parameters + 1)
    throw DimensionMismatch("relation '" + expectKind + "' column count " +
                            std::to_string(m.cols) + " does not match its dimensions");
  for (int r = 0; r < m.rows; ++r) {
    std::vector<std::string> cells = split_words(reader.next());
    if (static_cast<int>(cells.size()) != m.cols)
      throw DimensionMismatch("relation row has " + std::to_string(cells.size()) +
                              " columns, expected " + std::to_string(m.cols));
    std::vector<BigInt> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.emplace_back(c);
    m.data.push_back(std::move(row));
  }
  return m;
}

}  // namespace openscop_detail

inline std::string write_openscop(const Scop& scop) {
  using namespace openscop_detail;
  std::ostringstream os;
  int np = static_cast<int>(scop.parameterNames.size());

  os << "<OpenScop>\n\n";
  os << "# =============================================== Global\n";
  os << "# Backend Language\n";
  os << "none\n\n";

  os << "# Context\n";
  RelationMatrix ctx;
  ctx.parameters = np;
  auto ctxMatrix = scop.context.constraint_matrix();
  ctx.rows = static_cast<int>(ctxMatrix.size());
  ctx.cols = 1 + np + 1;
  for (int r = 0; r < ctx.rows; ++r) {
    std::vector<BigInt> row;
    row.push_back(scop.context.row_relation(r) == ConstraintRel::GE ? 1 : 0);
    for (const auto& v : ctxMatrix[static_cast<std::size_t>(r)]) row.push_back(v);
    ctx.data.push_back(std::move(row));
  }
  write_relation(os, "CONTEXT", ctx);
  os << "\n";

  os << "# Parameters are provided\n" << (np > 0 ? 1 : 0) << "\n";
  if (np > 0) {
    os << "<strings>\n";
    for (int i = 0; i < np; ++i) os << (i ? " " : "") << scop.parameterNames[static_cast<std::size_t>(i)];
    os << "\n</strings>\n";
  }
  os << "\n# Number of statements\n" << scop.statements.size() << "\n\n";

  // Array name table, ids assigned in order of first appearance.
  std::vector<std::string> arrayNames;
  std::map<std::string, int> arrayIds;
  for (const auto& s : scop.statements) {
    for (const auto& acc : s.accesses()) {
      if (!arrayIds.count(acc.array)) {
        arrayIds[acc.array] = static_cast<int>(arrayNames.size()) + 1;
        arrayNames.push_back(acc.array);
      }
    }
  }

  int stmtIndex = 0;
  for (const auto& s : scop.statements) {
    ++stmtIndex;
    int d = s.depth();
    os << "# =============================================== Statement " << stmtIndex << "\n";
    os << "# Number of relations describing the statement\n";
    os << 2 + s.reads.size() + s.writes.size() << "\n\n";

    // DOMAIN: output dims are the iterators.
    RelationMatrix dom;
    dom.outputDims = d;
    dom.parameters = np;
    auto domMatrix = s.domain.constraint_matrix();
    dom.rows = static_cast<int>(domMatrix.size());
    dom.cols = 1 + d + np + 1;
    for (int r = 0; r < dom.rows; ++r) {
      std::vector<BigInt> row;
      row.push_back(s.domain.row_relation(r) == ConstraintRel::GE ? 1 : 0);
      for (const auto& v : domMatrix[static_cast<std::size_t>(r)]) row.push_back(v);
      dom.data.push_back(std::move(row));
    }
    write_relation(os, "DOMAIN", dom);
    os << "\n";

    // SCATTERING: one equality row per scattering dimension, c_k = beta | iter.
    RelationMatrix scat;
    int scatDims = static_cast<int>(s.schedule.size());
    scat.outputDims = scatDims;
    scat.inputDims = d;
    scat.parameters = np;
    scat.rows = scatDims;
    scat.cols = 1 + scatDims + d + np + 1;
    for (int k = 0; k < scatDims; ++k) {
      std::vector<BigInt> row(static_cast<std::size_t>(scat.cols), BigInt(0));
      row[0] = 0;
      row[static_cast<std::size_t>(1 + k)] = -1;
      const ScatterDim& dim = s.schedule[static_cast<std::size_t>(k)];
      if (dim.isBeta) {
        row[static_cast<std::size_t>(scat.cols - 1)] = dim.beta;
      } else {
        row[static_cast<std::size_t>(1 + scatDims + dim.iter)] = 1;
      }
      scat.data.push_back(std::move(row));
    }
    write_relation(os, "SCATTERING", scat);
    os << "\n";

    auto writeAccess = [&](const AccessRelation& acc) {
      RelationMatrix rel;
      int rank = static_cast<int>(acc.subscripts.size());
      rel.outputDims = 1 + rank;
      rel.inputDims = d;
      rel.parameters = np;
      rel.rows = 1 + rank;
      rel.cols = 1 + (1 + rank) + d + np + 1;
      {
        std::vector<BigInt> row(static_cast<std::size_t>(rel.cols), BigInt(0));
        row[1] = -1;
        row[static_cast<std::size_t>(rel.cols - 1)] = arrayIds[acc.array];
        rel.data.push_back(std::move(row));
      }
      for (int t = 0; t < rank; ++t) {
        std::vector<BigInt> row(static_cast<std::size_t>(rel.cols), BigInt(0));
        row[static_cast<std::size_t>(1 + 1 + t)] = -1;
        const AffineExpr& e = acc.subscripts[static_cast<std::size_t>(t)];
        for (const auto& [id, coeff] : e.coeffs()) {
          if (!is_integer(coeff)) throw DimensionMismatch("non-integer subscript coefficient");
          row[static_cast<std::size_t>(1 + 1 + rank + id)] = numerator(coeff);
        }
        if (!is_integer(e.constant_term()))
          throw DimensionMismatch("non-integer subscript constant");
        row[static_cast<std::size_t>(rel.cols - 1)] = numerator(e.constant_term());
        rel.data.push_back(std::move(row));
      }
      write_relation(os, acc.kind == AccessKind::READ ? "READ" : "WRITE", rel);
      os << "\n";
    };
    for (const auto& acc : s.reads) writeAccess(acc);
    for (const auto& acc : s.writes) writeAccess(acc);

    os << "<body>\n";
    os << "# Statement number\n" << s.id << "\n";
    os << "# Number of original iterators\n" << d << "\n";
    if (d > 0) {
      os << "# List of original iterators\n";
      for (int i = 0; i < d; ++i) os << (i ? " " : "") << s.iterators[static_cast<std::size_t>(i)];
      os << "\n";
    }
    os << "# Statement body expression\n";
    std::string body = to_source(s.body);
    while (!body.empty() && body.back() == '\n') body.pop_back();
    os << body << "\n";
    os << "</body>\n\n";
  }

  os << "# =============================================== Extensions\n";
  os << "<arrays>\n";
  os << "# Number of arrays\n" << arrayNames.size() << "\n";
  os << "# Mapping array-identifiers/array-names\n";
  for (std::size_t i = 0; i < arrayNames.size(); ++i) os << (i + 1) << " " << arrayNames[i] << "\n";
  os << "</arrays>\n\n";
  os << "</OpenScop>\n";
  return os.str();
}

inline Scop read_openscop(const std::string& text) {
  using namespace openscop_detail;
  LineReader reader(text);

  if (reader.next() != "<OpenScop>") throw FormatError("missing <OpenScop> header", reader.line());
  std::string language = reader.next();
  (void)language;

  RelationMatrix ctx = read_relation(reader, "CONTEXT");
  int np = ctx.parameters;

  long paramsProvided = expect_long(reader.next(), reader.line());
  std::vector<std::string> paramNames;
  if (paramsProvided == 1) {
    if (reader.next() != "<strings>") throw FormatError("expected <strings>", reader.line());
    paramNames = split_words(reader.next());
    if (reader.next() != "</strings>") throw FormatError("expected </strings>", reader.line());
  }
  if (static_cast<int>(paramNames.size()) != np)
    throw DimensionMismatch("context declares " + std::to_string(np) + " parameters but " +
                            std::to_string(paramNames.size()) + " names were given");

  long stmtCount = expect_long(reader.next(), reader.line());

  // Statements are read structurally first; bodies are re-parsed at the end
  // once the <arrays> extension resolves array identifiers.
  struct PendingAccess {
    RelationMatrix m;
    AccessKind kind;
  };
  struct PendingStmt {
    RelationMatrix domain;
    RelationMatrix scattering;
    std::vector<PendingAccess> accesses;
    std::vector<std::string> iterators;
    std::string bodyText;
    int id = 0;
  };
  std::vector<PendingStmt> pending;

  for (long i = 0; i < stmtCount; ++i) {
    PendingStmt ps;
    long relationCount = expect_long(reader.next(), reader.line());
    if (relationCount < 2) throw FormatError("statement needs at least 2 relations", reader.line());
    ps.domain = read_relation(reader, "DOMAIN");
    ps.scattering = read_relation(reader, "SCATTERING");
    for (long rel = 2; rel < relationCount; ++rel) {
      std::string kind = reader.next();
      if (kind != "READ" && kind != "WRITE")
        throw FormatError("expected READ or WRITE relation, found '" + kind + "'", reader.line());
      // Re-read the matrix after the kind line: reuse read_relation by
      // rebuilding the header path manually.
      std::vector<std::string> header = split_words(reader.next());
      if (header.size() != 6) throw FormatError("relation header needs 6 fields", reader.line());
      RelationMatrix m;
      m.rows = static_cast<int>(expect_long(header[0], reader.line()));
      m.cols = static_cast<int>(expect_long(header[1], reader.line()));
      m.outputDims = static_cast<int>(expect_long(header[2], reader.line()));
      m.inputDims = static_cast<int>(expect_long(header[3], reader.line()));
      m.localDims = static_cast<int>(expect_long(header[4], reader.line()));
      m.parameters = static_cast<int>(expect_long(header[5], reader.line()));
      if (m.cols != 1 + m.outputDims + m.inputDims + m.localDims + m.parameters + 1)
        throw DimensionMismatch("access relation columns do not match its dimensions");
      for (int r = 0; r < m.rows; ++r) {
        std::vector<std::string> cells = split_words(reader.next());
        if (static_cast<int>(cells.size()) != m.cols)
          throw DimensionMismatch("access relation row width mismatch");
        std::vector<BigInt> row;
        for (const auto& c : cells) row.emplace_back(c);
        m.data.push_back(std::move(row));
      }
      ps.accesses.push_back({std::move(m), kind == "READ" ? AccessKind::READ : AccessKind::WRITE});
    }
    if (reader.next() != "<body>") throw FormatError("expected <body>", reader.line());
    ps.id = static_cast<int>(expect_long(reader.next(), reader.line()));
    long iterCount = expect_long(reader.next(), reader.line());
    if (iterCount > 0) ps.iterators = split_words(reader.next());
    if (static_cast<long>(ps.iterators.size()) != iterCount)
      throw DimensionMismatch("body iterator count mismatch");
    ps.bodyText = reader.next_raw();
    if (reader.next() != "</body>") throw FormatError("expected </body>", reader.line());
    pending.push_back(std::move(ps));
  }

  if (reader.next() != "<arrays>") throw FormatError("expected <arrays>", reader.line());
  long arrayCount = expect_long(reader.next(), reader.line());
  std::map<int, std::string> arrayNamesById;
  for (long i = 0; i < arrayCount; ++i) {
    std::vector<std::string> words = split_words(reader.next());
    if (words.size() != 2) throw FormatError("array mapping needs 'id name'", reader.line());
    arrayNamesById[static_cast<int>(expect_long(words[0], reader.line()))] = words[1];
  }
  if (reader.next() != "</arrays>") throw FormatError("expected </arrays>", reader.line());
  if (reader.next() != "</OpenScop>") throw FormatError("expected </OpenScop>", reader.line());

  // Assemble the scop.
  Scop scop;
  scop.parameterNames = paramNames;
  VarSpace ctxSpace;
  ctxSpace.numIterators = 0;
  ctxSpace.names = paramNames;
  scop.context = Polyhedron::universe(ctxSpace);
  for (const auto& row : ctx.data) {
    AffineExpr e;
    for (int pIdx = 0; pIdx < np; ++pIdx) e.set_coeff(pIdx, Rational(row[static_cast<std::size_t>(1 + pIdx)]));
    e.add_constant(Rational(row.back()));
    scop.context.add_constraint(e, row[0] == 0 ? ConstraintRel::EQ : ConstraintRel::GE);
  }

  for (const auto& ps : pending) {
    ScopStatement stmt;
    stmt.id = ps.id;
    stmt.iterators = ps.iterators;
    int d = static_cast<int>(ps.iterators.size());
    if (ps.domain.outputDims != d)
      throw DimensionMismatch("domain output dims do not match iterator list");
    if (ps.domain.parameters != np)
      throw DimensionMismatch("domain parameter count mismatch");

    VarSpace space;
    space.numIterators = d;
    for (const auto& it : ps.iterators) space.names.push_back(it);
    for (const auto& pn : paramNames) space.names.push_back(pn);
    Polyhedron domain(space);
    for (const auto& row : ps.domain.data) {
      AffineExpr e;
      for (int v = 0; v < d + np; ++v) e.set_coeff(v, Rational(row[static_cast<std::size_t>(1 + v)]));
      e.add_constant(Rational(row.back()));
      domain.add_constraint(e, row[0] == 0 ? ConstraintRel::EQ : ConstraintRel::GE);
    }
    stmt.domain = std::move(domain);

    // Scattering rows: -1 on the defined dim, then either +1 on an iterator
    // (iterator dim) or a constant (beta dim).
    int scatDims = ps.scattering.outputDims;
    if (ps.scattering.rows != scatDims || scatDims != 2 * d + 1)
      throw DimensionMismatch("scattering must have 2*depth+1 equality rows");
    for (int k = 0; k < scatDims; ++k) {
      const auto& row = ps.scattering.data[static_cast<std::size_t>(k)];
      if (row[0] != 0 || row[static_cast<std::size_t>(1 + k)] != -1)
        throw DimensionMismatch("scattering row " + std::to_string(k) + " is not in c_k = expr form");
      int iterHit = -1;
      for (int v = 0; v < d; ++v) {
        if (row[static_cast<std::size_t>(1 + scatDims + v)] != 0) {
          if (iterHit != -1 || row[static_cast<std::size_t>(1 + scatDims + v)] != 1)
            throw DimensionMismatch("scattering row mixes iterators");
          iterHit = v;
        }
      }
      if (iterHit >= 0) {
        stmt.schedule.push_back(ScatterDim::iterDim(iterHit));
      } else {
        stmt.schedule.push_back(ScatterDim::betaDim(static_cast<long>(row.back())));
      }
      bool expectBeta = (k % 2) == 0;
      if (stmt.schedule.back().isBeta != expectBeta)
        throw DimensionMismatch("scattering dims must alternate beta/iterator");
    }

    std::map<std::string, int> arrayRanks;
    for (const auto& pa : ps.accesses) {
      AccessRelation acc;
      acc.kind = pa.kind;
      int rank = pa.m.outputDims - 1;
      if (rank < 0 || pa.m.rows != rank + 1)
        throw DimensionMismatch("access relation needs 1+rank rows");
      const auto& head = pa.m.data[0];
      int arrayId = static_cast<int>(head.back());
      auto nameIt = arrayNamesById.find(arrayId);
      if (nameIt == arrayNamesById.end())
        throw DimensionMismatch("access references unknown array id " + std::to_string(arrayId));
      acc.array = nameIt->second;
      for (int t = 0; t < rank; ++t) {
        const auto& row = pa.m.data[static_cast<std::size_t>(1 + t)];
        AffineExpr e;
        for (int v = 0; v < d + np; ++v)
          e.set_coeff(v, Rational(row[static_cast<std::size_t>(1 + 1 + rank + v)]));
        e.add_constant(Rational(row.back()));
        acc.subscripts.push_back(std::move(e));
      }
      arrayRanks[acc.array] = rank;
      (pa.kind == AccessKind::READ ? stmt.reads : stmt.writes).push_back(std::move(acc));
    }

    stmt.body = parse_statement(ps.bodyText, arrayRanks, paramNames, ps.iterators);
    scop.statements.push_back(std::move(stmt));
  }
  return scop;
}

}  // namespace polytask
