#pragma once

#include "cmtk/parse.hpp"
#include "cmtk/semantics.hpp"

#include <memory>

namespace ts {

inline cmtk::Rat rat(long p, long q = 1) { return cmtk::Rat(p, q); }

// The running structure used across the suites:
//   sort S = {a,b,c}; d(a,b)=1/2, d(a,c)=1, d(b,c)=1/2;
//   R(a)=0, R(b)=1/4, R(c)=1; f(a)=b, f(b)=c, f(c)=c; constant e=a.
inline std::shared_ptr<const cmtk::Signature> m0_signature() {
  auto sig = std::make_shared<cmtk::Signature>();
  sig->sorts = {"S"};
  cmtk::FunctionSymbol f;
  f.name = "f";
  f.domain = {"S"};
  f.codomain = "S";
  sig->functions.push_back(f);
  cmtk::FunctionSymbol e;
  e.name = "e";
  e.codomain = "S";
  sig->functions.push_back(e);
  cmtk::RelationSymbol d;
  d.name = "d";
  d.domain = {"S", "S"};
  d.metric_for = "S";
  sig->relations.push_back(d);
  cmtk::RelationSymbol r;
  r.name = "R";
  r.domain = {"S"};
  sig->relations.push_back(r);
  sig->validate();
  return sig;
}

inline cmtk::FiniteStructure m0() {
  auto sig = m0_signature();
  cmtk::FiniteStructure M;
  M.sig = sig;
  M.carriers["S"] = {"a", "b", "c"};
  M.relations["d"] = {rat(0),    rat(1, 2), rat(1),     //
                      rat(1, 2), rat(0),    rat(1, 2),  //
                      rat(1),    rat(1, 2), rat(0)};
  M.relations["R"] = {rat(0), rat(1, 4), rat(1)};
  M.functions["f"] = {1, 2, 2};
  M.functions["e"] = {0};
  M.validate();
  return M;
}

inline cmtk::Formula fml(const cmtk::FiniteStructure& M, const std::string& text) {
  return cmtk::parse_formula(text, *M.sig);
}

inline cmtk::Rat eval(const cmtk::FiniteStructure& M, const std::string& text,
                      const std::map<std::string, std::string>& assign = {}) {
  cmtk::Value v = cmtk::eval_at(M, fml(M, text), assign);
  if (!v.is_exact) throw cmtk::CmtkError("expected exact value");
  return v.exact;
}

inline cmtk::Variable var(const std::string& name, const std::string& sort) {
  return cmtk::Variable{name, sort};
}

}  // namespace ts
