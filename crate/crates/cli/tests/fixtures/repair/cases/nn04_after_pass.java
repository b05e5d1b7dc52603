package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void findBoth() {
        Calc calc = new Calc();
        assertNotNull(calc.find("x"));
        assertNotNull(calc.find("w"));
    }
}
