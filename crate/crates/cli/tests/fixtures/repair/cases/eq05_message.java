package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void parsesNumber() {
        Calc calc = new Calc();
        assertEquals("parsed value", 41, calc.parse("42"));
    }
}
