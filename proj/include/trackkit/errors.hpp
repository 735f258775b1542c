#pragma once

#include <stdexcept>
#include <string>

namespace trackkit {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// nmea
struct MalformedSentence : Error { using Error::Error; };
struct ChecksumMismatch : Error {
    ChecksumMismatch(unsigned computed, unsigned declared, const std::string& line)
        : Error("checksum mismatch: computed 0x" + to_hex(computed) +
                ", declared 0x" + to_hex(declared) + " in: " + line),
          computed(computed), declared(declared) {}
    unsigned computed;
    unsigned declared;
  private:
    static std::string to_hex(unsigned v) {
        static const char* digits = "0123456789ABCDEF";
        return {digits[(v >> 4) & 0xF], digits[v & 0xF]};
    }
};
struct MalformedCoordinate : Error { using Error::Error; };
struct EmptyStream : Error { using Error::Error; };

// geodesy
struct OutOfZone : Error { using Error::Error; };

// track_model
struct MalformedGeometry : Error { using Error::Error; };
struct TooFewVertices : Error { using Error::Error; };
struct EmptySeries : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };

// survey_quality
struct SurveyTooShort : Error { using Error::Error; };
struct IrregularSampling : Error { using Error::Error; };
struct SeriesTooShort : Error { using Error::Error; };
struct DegenerateSeries : Error { using Error::Error; };

// behaviour
struct TooFewFixes : Error { using Error::Error; };
struct WindowTooLarge : Error { using Error::Error; };

// simulate
struct InvalidScenario : Error { using Error::Error; };

// ingest service
struct UnreadableFile : Error { using Error::Error; };
struct UnknownSurvey : Error { using Error::Error; };
struct NoAnalyzedSurveys : Error { using Error::Error; };

// cli / config
struct ConfigError : Error { using Error::Error; };

}  // namespace trackkit
